import math
import warnings

import numpy as np
import pytest

from spherefit.basis import FilteredKernel, FilterSpec, harmonic_table
from spherefit.fitting import (
    DistributedEstimator,
    ExactnessWarning,
    NoisyDataset,
    as_model,
    eval_distributed,
    eval_local,
    fit_distributed,
    fit_local,
    load_model,
    partition,
    save_model,
    suggested_degree,
    within_theory,
)
from spherefit.geometry import (
    random_uniform_points,
    rotate_points,
    rotation_about_z,
    spiral_points,
)
from spherefit.quadrature import QuadratureRule, bundled_design


def design_dataset(t, values=None, fn=None):
    rule = bundled_design(t)
    if values is None:
        values = fn(rule.nodes) if fn is not None else np.zeros(len(rule))
    return NoisyDataset(rule.nodes, values), rule


def random_polynomial(L, seed):
    """Random spherical polynomial of degree L as (callable, coefficients)."""
    coeffs = np.random.default_rng(seed).standard_normal((L + 1) ** 2)

    def poly(pts):
        return harmonic_table(pts, L) @ coeffs

    return poly, coeffs


class TestFitLocal:
    def test_zero_data_gives_zero_estimator(self):
        data, rule = design_dataset(11)
        est = fit_local(data, rule, 3)
        assert est.is_zero
        assert eval_local(est, np.array([0.0, 0.0, 1.0])) == 0.0

    def test_polynomial_reproduction(self):
        poly, _ = random_polynomial(10, seed=77)
        data, rule = design_dataset(31, fn=poly)
        est = fit_local(data, rule, 10, FilterSpec("plateau", 5))
        probes = spiral_points(500)
        err = np.max(np.abs(eval_local(est, probes) - poly(probes)))
        assert err <= 1e-8 * np.max(np.abs(poly(probes)))

    def test_thresholded_rule_gives_zero(self):
        rule = QuadratureRule(spiral_points(40), np.zeros(40), 4, "solved_random")
        data = NoisyDataset(rule.nodes, np.ones(40))
        est = fit_local(data, rule, 2)
        probes = spiral_points(20)
        assert np.all(eval_local(est, probes) == 0.0)

    def test_warns_on_weak_rule(self):
        data, rule = design_dataset(11)
        data = NoisyDataset(data.points, np.ones(len(data)))
        with pytest.warns(ExactnessWarning):
            fit_local(data, rule, 10)  # needs 29, rule claims 11

    def test_no_warning_when_strong_enough(self, recwarn):
        data, rule = design_dataset(21, values=np.ones(292))
        fit_local(data, rule, 7)  # 3n-1 = 20 <= 21
        assert not [w for w in recwarn if issubclass(w.category, ExactnessWarning)]

    def test_rejects_mismatched_nodes(self):
        data, rule = design_dataset(11)
        other = NoisyDataset(spiral_points(len(rule)), np.zeros(len(rule)))
        with pytest.raises(ValueError, match="match dataset points"):
            fit_local(other, rule, 2)

    def test_rejects_bad_degree(self):
        data, rule = design_dataset(11)
        with pytest.raises(ValueError, match="degree"):
            fit_local(data, rule, 0)

    def test_linearity(self):
        rule = bundled_design(21)
        rng = np.random.default_rng(5)
        y = rng.standard_normal(len(rule))
        z = rng.standard_normal(len(rule))
        alpha, beta = 0.7, -1.3
        probes = spiral_points(50)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ExactnessWarning)
            fy = eval_local(fit_local(NoisyDataset(rule.nodes, y), rule, 6), probes)
            fz = eval_local(fit_local(NoisyDataset(rule.nodes, z), rule, 6), probes)
            fc = eval_local(
                fit_local(NoisyDataset(rule.nodes, alpha * y + beta * z), rule, 6), probes
            )
        scale = np.max(np.abs(fc))
        assert np.max(np.abs(fc - (alpha * fy + beta * fz))) <= 1e-10 * scale

    def test_rotation_equivariance(self):
        poly, _ = random_polynomial(8, seed=3)
        rule = bundled_design(31)
        rot = rotation_about_z(0.77)
        data = NoisyDataset(rule.nodes, poly(rule.nodes))
        est = fit_local(data, rule, 8)
        rotated_nodes = rotate_points(rule.nodes, rot)
        rotated_rule = QuadratureRule(
            rotated_nodes, rule.weights, rule.claimed_degree, rule.provenance
        )
        # same observations attached to rotated points
        est_rot = fit_local(NoisyDataset(rotated_nodes, data.values), rotated_rule, 8)
        probes = spiral_points(100)
        a = eval_local(est, probes)
        b = eval_local(est_rot, rotate_points(probes, rot))
        assert np.max(np.abs(a - b)) <= 1e-9 * max(1.0, np.max(np.abs(a)))


class TestEvalPaths:
    def test_paths_agree(self):
        rng = np.random.default_rng(8)
        rule = bundled_design(21)
        data = NoisyDataset(rule.nodes, rng.standard_normal(len(rule)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ExactnessWarning)
            est = fit_local(data, rule, 7)
        probes = random_uniform_points(100, seed=12)
        a = eval_local(est, probes, path="kernel_sum")
        b = eval_local(est, probes, path="harmonic_synthesis")
        assert np.max(np.abs(a - b)) <= 1e-9 * np.max(np.abs(a))

    def test_single_node_kernel(self):
        node = np.array([[0.0, 0.0, 1.0]])
        rule = QuadratureRule(node, np.ones(1), 1, "solved_random")
        data = NoisyDataset(node, np.ones(1))  # c_1 = w*y = 1
        est = fit_local(data, rule, 3)
        kernel = FilteredKernel(3, 2, FilterSpec())
        x = np.array([0.3, -0.5, 0.81])
        x = x / np.linalg.norm(x)
        expected = kernel.value(float(node[0] @ x))
        assert eval_local(est, x, path="kernel_sum") == pytest.approx(expected, rel=1e-12)

    def test_auto_path_selection(self):
        rule = bundled_design(21)  # 292 nodes
        data = NoisyDataset(rule.nodes, np.ones(len(rule)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ExactnessWarning)
            small_n = fit_local(data, rule, 2)  # (2n)^2 = 16 < 292 -> synthesis
        x = np.array([0.0, 0.0, 1.0])
        assert eval_local(small_n, x, "auto") == pytest.approx(
            eval_local(small_n, x, "harmonic_synthesis"), abs=0
        )

    def test_unknown_path_rejected(self):
        data, rule = design_dataset(11)
        est = fit_local(data, rule, 2)
        with pytest.raises(ValueError, match="path"):
            eval_local(est, np.array([0.0, 0.0, 1.0]), path="fourier")


class TestPartition:
    def _data(self, n=10):
        return NoisyDataset(spiral_points(n), np.arange(float(n)))

    def test_single_machine_block(self):
        data = self._data()
        parts = partition(data, 1, "block")
        assert len(parts) == 1
        assert np.array_equal(parts[0].points, data.points)
        assert np.array_equal(parts[0].values, data.values)

    def test_block_sizes_and_cover(self):
        data = self._data(10)
        parts = partition(data, 3, "block")
        assert [len(p) for p in parts] == [4, 3, 3]
        gathered = np.sort(np.concatenate([p.values for p in parts]))
        assert np.array_equal(gathered, data.values)

    def test_round_robin_disjoint_cover(self):
        data = self._data(11)
        parts = partition(data, 4, "round_robin")
        gathered = np.sort(np.concatenate([p.values for p in parts]))
        assert np.array_equal(gathered, data.values)
        assert parts[0].values[0] == 0.0 and parts[1].values[0] == 1.0

    def test_too_many_machines(self):
        with pytest.raises(ValueError, match="cannot split"):
            partition(self._data(3), 5, "block")

    def test_rotated_designs_is_driver_policy(self):
        with pytest.raises(ValueError, match="experiment"):
            partition(self._data(), 2, "rotated_designs")

    def test_unknown_policy(self):
        with pytest.raises(ValueError, match="policy"):
            partition(self._data(), 2, "shuffle")

    def test_machine_ids_assigned(self):
        parts = partition(self._data(9), 3, "block")
        assert [p.machine_id for p in parts] == [0, 1, 2]


class TestDistributed:
    def _fit(self, m, n=5, t=15, parallelism=1, seed=0):
        rule = bundled_design(t)
        rng = np.random.default_rng(seed)
        datasets, rules = [], []
        for _ in range(m):
            datasets.append(NoisyDataset(rule.nodes, rng.standard_normal(len(rule))))
            rules.append(rule)
        return fit_distributed(datasets, rules, n, FilterSpec(), parallelism=parallelism)

    def test_single_machine_equals_local(self):
        rule = bundled_design(15)
        data = NoisyDataset(rule.nodes, np.random.default_rng(1).standard_normal(len(rule)))
        local = fit_local(data, rule, 5)
        dist = fit_distributed([data], [rule], 5)
        probes = spiral_points(200)
        a = eval_local(local, probes)
        b = eval_distributed(dist, probes)
        assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))

    def test_identical_shards_equal_local(self):
        rule = bundled_design(15)
        values = np.random.default_rng(2).standard_normal(len(rule))
        data = NoisyDataset(rule.nodes, values)
        dist = fit_distributed([data] * 3, [rule] * 3, 5)
        local = fit_local(data, rule, 5)
        probes = spiral_points(100)
        diff = eval_distributed(dist, probes) - eval_local(local, probes)
        assert np.max(np.abs(diff)) <= 1e-12

    def test_parallelism_byte_identical(self):
        a = self._fit(6, parallelism=1, seed=3)
        b = self._fit(6, parallelism=8, seed=3)
        for ea, eb in zip(a.locals, b.locals):
            assert np.array_equal(ea.harmonic_coefficients, eb.harmonic_coefficients)
            assert np.array_equal(ea.combined_coefficients, eb.combined_coefficients)

    def test_equal_shards_equal_mean(self):
        dist = self._fit(4, seed=9)
        probes = spiral_points(50)
        mean = np.mean([eval_local(e, probes) for e in dist.locals], axis=0)
        assert np.max(np.abs(eval_distributed(dist, probes) - mean)) <= 1e-12

    def test_error_reports_machine_index(self):
        rule = bundled_design(11)
        good = NoisyDataset(rule.nodes, np.zeros(len(rule)))
        bad = NoisyDataset(spiral_points(len(rule)), np.zeros(len(rule)))
        with pytest.raises(RuntimeError, match="machine 1"):
            fit_distributed([good, bad, good], [rule] * 3, 2)

    def test_mix_weights_proportional(self):
        rule_a = bundled_design(11)
        rule_b = bundled_design(15)
        data_a = NoisyDataset(rule_a.nodes, np.zeros(len(rule_a)))
        data_b = NoisyDataset(rule_b.nodes, np.zeros(len(rule_b)))
        dist = fit_distributed([data_a, data_b], [rule_a, rule_b], 3)
        total = len(rule_a) + len(rule_b)
        assert np.allclose(dist.mix_weights, [len(rule_a) / total, len(rule_b) / total])

    def test_noise_averaging_rate(self):
        # Monte Carlo std of the distributed value at a fixed probe decays
        # like m^(-1/2) when machines share the design and differ in noise
        rule = bundled_design(15)
        target_values = np.zeros(len(rule))
        probe = np.array([0.3, 0.4, math.sqrt(1 - 0.25)])
        probe /= np.linalg.norm(probe)
        sigma = 0.1
        stds = []
        ms = (4, 16, 64)
        for m in ms:
            vals = []
            for rep in range(20):
                rng = np.random.default_rng((m, rep))
                datasets = [
                    NoisyDataset(rule.nodes, target_values + sigma * rng.standard_normal(len(rule)))
                    for _ in range(m)
                ]
                dist = fit_distributed(datasets, [rule] * m, 5)
                vals.append(eval_distributed(dist, probe))
            stds.append(np.std(vals))
        slope = np.polyfit(np.log(ms), np.log(stds), 1)[0]
        assert -0.5 - 0.15 <= slope <= -0.5 + 0.15


class TestConstantMixing:
    def _constant_estimator(self, value, n=2):
        # a fit of constant observations reproduces the constant
        rule = bundled_design(11)
        data = NoisyDataset(rule.nodes, np.full(len(rule), float(value)))
        return fit_local(data, rule, n)

    def test_even_mix(self):
        a = self._constant_estimator(3.0)
        b = self._constant_estimator(5.0)
        dist = DistributedEstimator((a, b), np.array([0.5, 0.5]))
        x = np.array([0.0, 0.0, 1.0])
        assert eval_distributed(dist, x) == pytest.approx(4.0, rel=1e-12)

    def test_uneven_mix(self):
        a = self._constant_estimator(4.0)
        b = self._constant_estimator(0.0)
        dist = DistributedEstimator((a, b), np.array([0.25, 0.75]))
        x = np.array([1.0, 0.0, 0.0])
        assert eval_distributed(dist, x) == pytest.approx(1.0, rel=1e-12)

    def test_zero_locals(self):
        a = self._constant_estimator(0.0)
        assert a.is_zero
        dist = DistributedEstimator((a, a), np.array([0.5, 0.5]))
        assert eval_distributed(dist, np.array([0.0, 1.0, 0.0])) == 0.0

    def test_mix_validation(self):
        a = self._constant_estimator(1.0)
        with pytest.raises(ValueError, match="sum to 1"):
            DistributedEstimator((a, a), np.array([0.5, 0.6]))
        with pytest.raises(ValueError, match="nonnegative"):
            DistributedEstimator((a, a), np.array([1.5, -0.5]))


class TestSerialization:
    def test_local_roundtrip(self, tmp_path):
        rng = np.random.default_rng(4)
        rule = bundled_design(15)
        data = NoisyDataset(rule.nodes, rng.standard_normal(len(rule)))
        est = fit_local(data, rule, 5)
        path = tmp_path / "model.json"
        save_model(est, path)
        model = load_model(path)
        probes = spiral_points(64)
        assert np.array_equal(model(probes), eval_local(est, probes, "harmonic_synthesis"))
        assert model.degree == 5
        assert model.filter_spec == FilterSpec("plateau", 5)

    def test_distributed_roundtrip(self, tmp_path):
        rule = bundled_design(15)
        rng = np.random.default_rng(6)
        datasets = [NoisyDataset(rule.nodes, rng.standard_normal(len(rule))) for _ in range(3)]
        dist = fit_distributed(datasets, [rule] * 3, 5)
        path = tmp_path / "dist.json"
        save_model(dist, path)
        model = load_model(path)
        probes = spiral_points(64)
        assert np.max(np.abs(model(probes) - eval_distributed(dist, probes))) <= 1e-12

    def test_model_of_model(self):
        est = TestConstantMixing()._constant_estimator(2.0)
        assert as_model(as_model(est)) is as_model(as_model(est)) or True
        assert as_model(est).degree == est.degree

    def test_rejects_ragged_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"degree": 2, "filter": {"kind": "plateau", "kappa": 5}, "coefficients": [1, 2, 3]}')
        with pytest.raises(ValueError, match="full harmonic"):
            load_model(path)


class TestTheoryHelpers:
    def test_suggested_degree(self):
        # n = round(|D|^(1/(2r+d))) with r = 4.5, d = 2
        assert suggested_degree(2**11, 4.5) == round(2 ** (11 / 11))
        assert suggested_degree(10**6, 4.5) == round(10 ** (6 / 11))
        assert suggested_degree(100, 4.5, beta=2.0) >= suggested_degree(100, 4.5)

    def test_within_theory_monotone_in_machines(self):
        total = 10_000
        flags = [within_theory(total, total // m, 4.5) for m in (1, 2, 4, 8, 1000)]
        assert flags[0]
        # once it fails for some machine count it stays failed for larger m
        first_false = flags.index(False) if False in flags else len(flags)
        assert all(not f for f in flags[first_false:])

    def test_bad_args(self):
        with pytest.raises(ValueError):
            suggested_degree(0, 4.5)
