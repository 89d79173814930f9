import math

import numpy as np
import pytest

from spherefit.basis import FOUR_PI, flat_index, harmonic_table
from spherefit.geometry import rotate_points, rotation_about_z, spiral_points
from spherefit.quadrature import bundled_design, equal_weight_rule
from spherefit.testbed import (
    NoiseModel,
    WendlandTarget,
    fourier_coefficients,
    l2_error,
    parseval_l2_norm,
    sample_noisy,
    sobolev_norm,
    target_eval,
    wendland_normalized,
    wendland_raw,
)

# frozen oracle values (40-digit arithmetic on the closed forms)
TARGET_AT_E1_CHORDAL = 1.5544956259839832135
TARGET_AT_E1_INNER = 5.3732985199032630365
WENDLAND_NORM_AT_2 = 0.013807138785015927906


class TestWendlandProfile:
    def test_endpoint_values(self):
        assert wendland_raw(0.0) == 1.0
        assert wendland_raw(1.0) == 0.0
        assert wendland_raw(2.5) == 0.0

    def test_half_value(self):
        # direct arithmetic: (1/2)^8 (32/8 + 25/4 + 4 + 1) = 15.25 / 256
        assert wendland_raw(0.5) == pytest.approx(15.25 / 256, rel=1e-15)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            wendland_raw(-0.1)

    def test_nonincreasing_on_support(self):
        u = np.linspace(0.0, 1.0, 500)
        v = wendland_raw(u)
        assert np.all(v >= 0.0)
        assert np.all(np.diff(v) <= 1e-15)

    def test_smooth_cutoff(self):
        # value and first two finite-difference derivatives vanish at u = 1
        h = 1e-5
        f = wendland_raw
        assert f(1.0) == 0.0
        d1 = (f(1.0) - f(1.0 - h)) / h
        d2 = (f(1.0) - 2 * f(1.0 - h) + f(1.0 - 2 * h)) / h**2
        assert abs(d1) <= 1e-8
        assert abs(d2) <= 1e-3

    def test_normalized_values(self):
        assert wendland_normalized(0.0) == 1.0
        assert wendland_normalized(15.0 * math.sqrt(math.pi) / 8.0) == pytest.approx(0.0, abs=1e-30)
        assert wendland_normalized(2.0) == pytest.approx(WENDLAND_NORM_AT_2, rel=1e-14)
        assert wendland_normalized(2.0) > 0.0  # globally supported on the sphere


class TestTarget:
    def test_value_at_center_chordal(self):
        t = WendlandTarget()
        assert t(np.array([1.0, 0.0, 0.0])) == pytest.approx(TARGET_AT_E1_CHORDAL, rel=1e-14)

    def test_value_at_center_inner(self):
        t = WendlandTarget(argument_convention="inner_product")
        assert t(np.array([1.0, 0.0, 0.0])) == pytest.approx(TARGET_AT_E1_INNER, rel=1e-14)

    def test_conventions_differ(self):
        x = np.array([1.0, 0.0, 0.0])
        assert WendlandTarget()(x) != WendlandTarget(argument_convention="inner_product")(x)

    def test_octahedral_symmetry(self, random_points):
        t = WendlandTarget()
        pts = random_points(50, 17)
        base = t(pts)
        for perm in ([1, 0, 2], [2, 1, 0], [0, 2, 1]):
            assert np.max(np.abs(t(pts[:, perm]) - base)) <= 1e-14
        for axis in range(3):
            flipped = pts.copy()
            flipped[:, axis] *= -1.0
            assert np.max(np.abs(t(flipped) - base)) <= 1e-14

    def test_positive_and_bounded(self, random_points):
        t = WendlandTarget()
        vals = t(random_points(2000, 23))
        assert np.all(vals > 0.0)
        assert np.all(vals <= 6.0)

    def test_unknown_convention(self):
        with pytest.raises(ValueError):
            WendlandTarget(argument_convention="spherical")


class TestNoise:
    def test_none_is_exact(self):
        pts = spiral_points(100)
        data = sample_noisy(pts, WendlandTarget(), NoiseModel("none"), seed=4)
        assert np.array_equal(data.values, target_eval(WendlandTarget(), pts))

    def test_gaussian_moments(self):
        n = 100_000
        model = NoiseModel("gaussian", sigma=0.1, seed=3)
        eps = model.sample(n, seed=5)
        assert abs(eps.mean()) <= 3 * 0.1 / math.sqrt(n)
        assert eps.std() == pytest.approx(0.1, rel=0.02)

    def test_uniform_bounded(self):
        model = NoiseModel("uniform_bounded", bound=0.5, seed=9)
        pts = spiral_points(5000)
        data = sample_noisy(pts, WendlandTarget(), model, seed=2)
        noise = data.values - target_eval(WendlandTarget(), pts)
        assert np.max(np.abs(noise)) <= 0.5

    def test_reproducible(self):
        model = NoiseModel("gaussian", sigma=1.0, seed=7)
        assert np.array_equal(model.sample(1000, seed=1), model.sample(1000, seed=1))

    def test_streams_independent(self):
        model = NoiseModel("gaussian", sigma=1.0, seed=7)
        a = model.sample(100_000, seed=1)
        b = model.sample(100_000, seed=2)
        corr = float(np.corrcoef(a, b)[0, 1])
        assert abs(corr) <= 0.02

    def test_invalid_model(self):
        with pytest.raises(ValueError):
            NoiseModel("poisson")
        with pytest.raises(ValueError):
            NoiseModel("gaussian", sigma=-1.0)


class TestL2Error:
    def test_zero_for_equal_functions(self):
        t = WendlandTarget()
        rule = equal_weight_rule(spiral_points(2000))
        assert l2_error(t, t, rule) == 0.0

    def test_constant_offset(self):
        t = WendlandTarget()
        rule = bundled_design(11)  # exact for constants

        def shifted(pts):
            return t(pts) + 1.0

        assert l2_error(shifted, t, rule) == pytest.approx(math.sqrt(FOUR_PI), rel=1e-12)

    def test_rotation_invariance(self):
        t = WendlandTarget()
        rot = rotation_about_z(1.1)
        rule = equal_weight_rule(spiral_points(3000))
        rotated_rule = equal_weight_rule(rotate_points(rule.nodes, rot))

        def f(pts):
            return t(pts) + 0.3 * pts[:, 2]

        def t_rot(pts):
            return t(rotate_points(pts, rot.T))

        def f_rot(pts):
            return f(rotate_points(pts, rot.T))

        a = l2_error(f, t, rule)
        b = l2_error(f_rot, t_rot, rotated_rule)
        assert a == pytest.approx(b, abs=1e-10)

    def test_eval_grid_cross_validation(self):
        # spiral grid vs strong design agree within 1% for a smooth integrand
        t = WendlandTarget()

        def approx(pts):
            return t(pts) * (1.0 + 0.01 * pts[:, 0])

        spiral_rule = equal_weight_rule(spiral_points(10000))
        design_rule = bundled_design(47)
        a = l2_error(approx, t, spiral_rule)
        b = l2_error(approx, t, design_rule)
        assert a == pytest.approx(b, rel=0.01)


class TestFourier:
    def test_constant_function(self):
        rule = bundled_design(21)
        diag = fourier_coefficients(lambda pts: np.ones(len(pts)), 5, rule)
        assert diag.coefficients[0] == pytest.approx(math.sqrt(FOUR_PI), rel=1e-12)
        assert np.max(np.abs(diag.coefficients[1:])) <= 1e-10
        assert parseval_l2_norm(diag) == pytest.approx(math.sqrt(FOUR_PI), rel=1e-10)

    def test_picks_out_single_harmonic(self):
        L = 4
        rule = bundled_design(2 * L)
        idx = flat_index(3, 2)

        def f(pts):
            return harmonic_table(pts, L)[:, idx]

        diag = fourier_coefficients(f, L, rule)
        assert diag.coefficients[idx] == pytest.approx(1.0, rel=1e-9)
        rest = np.delete(diag.coefficients, idx)
        assert np.max(np.abs(rest)) <= 1e-9

    def test_target_coefficient_decay(self):
        rule = bundled_design(75)
        diag = fourier_coefficients(WendlandTarget(), 30, rule)
        energies = diag.degree_energies()
        head = float(np.sum(energies[:26]))
        tail = float(np.sum(energies[26:]))
        assert tail <= 1e-3 * head

    def test_octahedral_symmetry_kills_odd_degrees(self):
        rule = bundled_design(31)
        diag = fourier_coefficients(WendlandTarget(), 9, rule)
        energies = diag.degree_energies()
        assert np.max(energies[1::2]) <= 1e-20


class TestSobolev:
    def test_constant(self):
        rule = bundled_design(11)
        diag = fourier_coefficients(lambda pts: np.ones(len(pts)), 3, rule)
        for r in (0.0, 1.0, 4.5):
            assert sobolev_norm(diag, r) == pytest.approx(math.sqrt(FOUR_PI), rel=1e-9)

    def test_single_harmonic_weight(self):
        L = 3
        rule = bundled_design(2 * L)
        idx = flat_index(2, 1)

        def f(pts):
            return harmonic_table(pts, L)[:, idx]

        diag = fourier_coefficients(f, L, rule)
        # lambda_2 = 6, so the r = 1 norm is sqrt(1 + 6)
        assert sobolev_norm(diag, 1.0) == pytest.approx(math.sqrt(7.0), rel=1e-9)

    def test_monotone_in_smoothness(self):
        rule = bundled_design(31)
        diag = fourier_coefficients(WendlandTarget(), 10, rule)
        norms = [sobolev_norm(diag, r) for r in (0.0, 1.0, 2.0, 4.5)]
        assert all(b >= a for a, b in zip(norms, norms[1:]))

    def test_rejects_negative_smoothness(self):
        rule = bundled_design(11)
        diag = fourier_coefficients(lambda pts: np.ones(len(pts)), 2, rule)
        with pytest.raises(ValueError):
            sobolev_norm(diag, -1.0)
