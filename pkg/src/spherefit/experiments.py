"""Experiment drivers: degree, noise-level and machine-count sweeps.

Each sweep fits distributed estimators to noisy samples of the built-in
target and reports the L2 error on a dense spiral evaluation grid, averaged
over replicates.  Results land in CSV files (one per noise level) and an
optional log-log figure with fitted slopes, rendered with matplotlib.

Reproducibility contract: a sweep is a pure function of its configuration
and base seed.  Machine j's noise in replicate k is drawn from the stream
keyed (k, j), independently of every other machine, of the worker count and
of the sweep kind, so any single cell can be re-fitted in isolation (for
instance through the command line) and must agree with the sweep's row.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import FilterSpec, harmonic_blocks, harmonic_table
from .fitting import (
    ExactnessWarning,
    NoisyDataset,
    fit_distributed,
    fit_local,
    partition,
    within_theory,
)
from .geometry import (
    random_density_points,
    random_uniform_points,
    rotate_points,
    rotation_about_z,
    spiral_points,
)
from .quadrature import (
    QuadratureRule,
    QuadratureSolveError,
    bundled_design,
    equal_weight_rule,
    load_design,
    solve_weights,
    threshold_weights,
)
from .testbed import WendlandTarget

SAMPLING_MODES = ("rotated_designs", "random_uniform", "random_density")

# demonstration density for the random_density sampling mode: bounded away
# from zero and above by 1.5 relative to the uniform law
DEMO_DENSITY_BOUND = 1.5


def demo_density(points: np.ndarray) -> np.ndarray:
    return 1.0 + 0.5 * points[:, 2]


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one sweep; see the CLI for the matching flags."""

    kind: str                           # "degree" | "sigma" | "machines"
    degrees: tuple = (15,)
    machines: tuple = (20,)
    sigmas: tuple = (0.1,)
    design_t: int = 45
    design_path: str | None = None
    replicates: int = 10
    base_seed: int = 0
    eval_points: int = 10_000
    filter_kind: str = "plateau"
    kappa: int = 5
    sampling: str = "rotated_designs"
    smoothness: float = 4.5
    fixed_total: bool = False
    total_data: int = 4000
    workers: int = 1
    timing: bool = False

    def __post_init__(self):
        if self.kind not in ("degree", "sigma", "machines"):
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        if any(s < 0 for s in self.sigmas):
            raise ValueError("noise levels must be nonnegative")
        if any(n < 1 for n in self.degrees) or any(m < 1 for m in self.machines):
            raise ValueError("degrees and machine counts must be >= 1")
        if self.sampling not in SAMPLING_MODES:
            raise ValueError(f"unknown sampling mode {self.sampling!r}")

    @property
    def filter_spec(self) -> FilterSpec:
        return FilterSpec(self.filter_kind, self.kappa)


@dataclass(frozen=True)
class ResultRow:
    """One aggregated sweep point."""

    x: float
    mean_error: float
    std_error: float
    replicates: int
    within_theory: bool
    seconds: float


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    prefactor: float
    residual: float


def noise_stream(base_seed: int, replicate: int, machine: int) -> np.random.Generator:
    """Unit-variance noise stream of one machine in one replicate."""
    return np.random.default_rng(
        np.random.SeedSequence(base_seed, spawn_key=(replicate, machine, 0))
    )


def points_stream_seed(base_seed: int, replicate: int, machine: int):
    return np.random.SeedSequence(base_seed, spawn_key=(replicate, machine, 1))


def base_rule(config: ExperimentConfig) -> QuadratureRule:
    if config.design_path is not None:
        return load_design(config.design_path, config.design_t)
    return bundled_design(config.design_t)


def rotated_rules(base: QuadratureRule, m: int) -> list[QuadratureRule]:
    """Per-machine copies of a design, machine j rotated by j*pi/m about
    the z axis (a rotated design retains its exactness)."""
    rules = []
    for j in range(1, m + 1):
        nodes = rotate_points(base.nodes, rotation_about_z(j * math.pi / m))
        rules.append(QuadratureRule(nodes, base.weights, base.claimed_degree, base.provenance))
    return rules


# ---------------------------------------------------------------------------
# Fast path for rotated-design sweeps
# ---------------------------------------------------------------------------
#
# A local fit's harmonic coefficients are eta(l/n) * Y^T (w * y), linear in
# the observations.  With y = f + sigma * eps the per-machine raw moments
# split into a target part and a unit-noise part per replicate; every
# (n, sigma) cell is then a cheap reweighting, and the error one synthesis
# against the cached evaluation-grid harmonics.

class _EvalGrid:
    def __init__(self, n_points: int, target):
        self.rule = equal_weight_rule(spiral_points(n_points), 0)
        self.target_values = np.asarray(target(self.rule.nodes), dtype=float)
        self._table = None
        self._L = -1

    def table(self, L: int) -> np.ndarray:
        if L > self._L:
            self._table = harmonic_table(self.rule.nodes, L)
            self._L = L
        return self._table[:, : (L + 1) ** 2]

    def error_of(self, coefficients: np.ndarray) -> float:
        L = int(round(math.sqrt(len(coefficients)))) - 1
        diff = self.table(L) @ coefficients - self.target_values
        return math.sqrt(float(np.sum(self.rule.weights * diff * diff)))


def _machine_moments(rule, target, L, base_seed, replicates):
    """Raw analysis moments of one machine: target part and one unit-noise
    part per replicate (machine identity comes from rule ordering)."""
    w = rule.weights
    f_part = w * np.asarray(target(rule.nodes), dtype=float)
    parts = [f_part]
    machine = rule.machine_index
    for k in range(replicates):
        eps = noise_stream(base_seed, k, machine).standard_normal(len(w))
        parts.append(w * eps)
    stacked = np.stack(parts, axis=1)  # (N, 1 + R)
    out = np.empty(((L + 1) ** 2, stacked.shape[1]))
    for ell, block in harmonic_blocks(rule.nodes, L):
        out[ell * ell : (ell + 1) ** 2] = block.T @ stacked
    return out


@dataclass(frozen=True)
class _MachineRule:
    nodes: np.ndarray
    weights: np.ndarray
    machine_index: int


def _degree_weights(filter_spec: FilterSpec, n: int) -> np.ndarray:
    L = 2 * n - 1
    eta = filter_spec.value(np.arange(L + 1) / n)
    return np.repeat(eta, [2 * ell + 1 for ell in range(L + 1)])


def _rotated_sweep_moments(config, m, L, replicates):
    base = base_rule(config)
    rules = [
        _MachineRule(
            rotate_points(base.nodes, rotation_about_z(j * math.pi / m)),
            base.weights,
            j,
        )
        for j in range(1, m + 1)
    ]
    target = WendlandTarget()

    def one(rule):
        return _machine_moments(rule, target, L, config.base_seed, replicates)

    if config.workers <= 1:
        moments = [one(r) for r in rules]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            moments = list(pool.map(one, rules))
    return base, moments


def _cell_errors(moments, grid, filter_spec, n, sigma, replicates):
    """Errors of every replicate of one (n, sigma) cell."""
    eta = _degree_weights(filter_spec, n)
    size = len(eta)
    m = len(moments)
    f_global = np.zeros(size)
    noise_global = np.zeros((size, replicates))
    for mom in moments:
        f_global += mom[:size, 0]
        noise_global += mom[:size, 1 : replicates + 1]
    f_global /= m
    noise_global /= m
    errors = []
    for k in range(replicates):
        coeffs = eta * (f_global + sigma * noise_global[:, k])
        errors.append(grid.error_of(coeffs))
    return errors


def _aggregate(x, errors, within, seconds, timing) -> ResultRow:
    arr = np.asarray(errors, dtype=float)
    std_err = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return ResultRow(
        x=float(x),
        mean_error=float(arr.mean()),
        std_error=std_err,
        replicates=len(arr),
        within_theory=bool(within),
        seconds=round(seconds, 3) if timing else 0.0,
    )


def _effective_replicates(config, sigma) -> int:
    return 1 if sigma == 0.0 else config.replicates


def run_degree_sweep(config: ExperimentConfig) -> dict[float, list[ResultRow]]:
    """Mean L2 error against the fit degree, one curve per noise level."""
    if not config.degrees:
        raise ValueError("degree sweep needs a degree range")
    m = config.machines[0]
    n_max = max(config.degrees)
    base = base_rule(config)
    rotated = config.sampling == "rotated_designs"
    if rotated and base.claimed_degree < 3 * n_max - 1:
        warnings.warn(
            f"design strength {base.claimed_degree} < 3n-1 = {3 * n_max - 1} "
            "for the largest degree",
            ExactnessWarning,
            stacklevel=2,
        )
    L = 2 * n_max - 1
    grid = _EvalGrid(config.eval_points, WendlandTarget())
    grid.table(L)
    total = m * len(base.nodes)
    within = within_theory(total, len(base.nodes), config.smoothness)
    max_reps = max(_effective_replicates(config, s) for s in config.sigmas)

    if rotated:
        _, moments = _rotated_sweep_moments(config, m, L, max_reps)
        random_moments = {}
    else:
        random_moments = {
            n: _random_sweep_moments(config, m, n, max_reps) for n in config.degrees
        }

    out: dict[float, list[ResultRow]] = {}
    for sigma in config.sigmas:
        rows = []
        for n in sorted(config.degrees):
            start = time.perf_counter()
            reps = _effective_replicates(config, sigma)
            if rotated:
                errors = _cell_errors(moments, grid, config.filter_spec, n, sigma, reps)
            else:
                errors = _random_cell_errors(
                    random_moments[n], grid, config.filter_spec, n, sigma, reps
                )
            rows.append(_aggregate(n, errors, within, time.perf_counter() - start, config.timing))
        out[float(sigma)] = rows
    return out


def run_sigma_sweep(config: ExperimentConfig) -> list[ResultRow]:
    """Mean L2 error against the noise level at fixed degree and machines."""
    if sum(1 for s in config.sigmas if s > 0) < 3:
        raise ValueError("sigma sweep needs at least three positive noise levels")
    n = config.degrees[0]
    m = config.machines[0]
    L = 2 * n - 1
    base = base_rule(config)
    rotated = config.sampling == "rotated_designs"
    grid = _EvalGrid(config.eval_points, WendlandTarget())
    grid.table(L)
    within = within_theory(m * len(base.nodes), len(base.nodes), config.smoothness)
    max_reps = max(_effective_replicates(config, s) for s in config.sigmas)
    if rotated:
        _, moments = _rotated_sweep_moments(config, m, L, max_reps)
    else:
        moments = _random_sweep_moments(config, m, n, max_reps)

    rows = []
    for sigma in sorted(config.sigmas):
        start = time.perf_counter()
        reps = _effective_replicates(config, sigma)
        if rotated:
            errors = _cell_errors(moments, grid, config.filter_spec, n, sigma, reps)
        else:
            errors = _random_cell_errors(moments, grid, config.filter_spec, n, sigma, reps)
        rows.append(_aggregate(sigma, errors, within, time.perf_counter() - start, config.timing))
    return rows


def run_machines_sweep(config: ExperimentConfig) -> dict[float, list[ResultRow]]:
    """Mean L2 error against the machine count, one curve per noise level.

    Default sampling follows the growth design: machine j holds a fresh
    noisy sample on its own rotated design, so total data grows with m.
    With fixed_total=True a single random dataset of `total_data` points is
    partitioned across the machines instead, with per-shard solved weights.
    """
    if not config.machines:
        raise ValueError("machines sweep needs a machine range")
    n = config.degrees[0]
    L = 2 * n - 1
    grid = _EvalGrid(config.eval_points, WendlandTarget())
    grid.table(L)

    max_reps = max(_effective_replicates(config, s) for s in config.sigmas)
    out: dict[float, list[ResultRow]] = {float(s): [] for s in config.sigmas}
    for m in sorted(config.machines):
        if config.fixed_total:
            per_sigma = _fixed_total_errors(config, n, m, grid)
            sizes_min, total = per_sigma.pop("_sizes")
        else:
            rotated = config.sampling == "rotated_designs"
            base = base_rule(config)
            if rotated:
                _, moments = _rotated_sweep_moments(config, m, L, max_reps)
            else:
                moments = _random_sweep_moments(config, m, n, max_reps)
            sizes_min, total = len(base.nodes), m * len(base.nodes)
            per_sigma = {}
            for sigma in config.sigmas:
                reps = _effective_replicates(config, sigma)
                start = time.perf_counter()
                if rotated:
                    errors = _cell_errors(moments, grid, config.filter_spec, n, sigma, reps)
                else:
                    errors = _random_cell_errors(
                        moments, grid, config.filter_spec, n, sigma, reps
                    )
                per_sigma[float(sigma)] = (errors, time.perf_counter() - start)
        within = within_theory(total, sizes_min, config.smoothness)
        for sigma in config.sigmas:
            errors, seconds = per_sigma[float(sigma)]
            out[float(sigma)].append(_aggregate(m, errors, within, seconds, config.timing))
    return out


def _fixed_total_errors(config, n, m, grid):
    """One machines-sweep column in the fixed-total-data setting."""
    target = WendlandTarget()
    per_sigma = {float(s): ([], 0.0) for s in config.sigmas}
    min_shard = config.total_data
    for sigma in config.sigmas:
        reps = _effective_replicates(config, sigma)
        errors = []
        start = time.perf_counter()
        for k in range(reps):
            pts = random_uniform_points(
                config.total_data, points_stream_seed(config.base_seed, k, 0)
            )
            clean = target(pts)
            eps = noise_stream(config.base_seed, k, 0).standard_normal(len(pts))
            data = NoisyDataset(pts, clean + sigma * eps)
            shards = partition(data, m, "round_robin")
            min_shard = min(min_shard, min(len(s) for s in shards))
            locals_ = [_random_local_fit(shard, n, config.filter_spec) for shard in shards]
            sizes = np.array([len(s) for s in shards], dtype=float)
            coeffs = np.zeros((2 * n) ** 2)
            for size, est in zip(sizes, locals_):
                coeffs += (size / sizes.sum()) * est.harmonic_coefficients
            errors.append(grid.error_of(coeffs))
        per_sigma[float(sigma)] = (errors, time.perf_counter() - start)
    per_sigma["_sizes"] = (min_shard, config.total_data)
    return per_sigma


def _solved_rule(points: np.ndarray, n: int) -> QuadratureRule:
    """Solved nonnegative weights with the spread-bound guard; an infeasible
    solve degrades to the all-zero rule (the estimator then vanishes),
    mirroring the guard branch of the random-sampling construction."""
    try:
        return threshold_weights(solve_weights(points, n))
    except (QuadratureSolveError, ValueError):
        return QuadratureRule(points, np.zeros(len(points)), n, "solved_random")


def _random_local_fit(shard: NoisyDataset, n: int, filter_spec: FilterSpec):
    return fit_local(shard, _solved_rule(shard.points, n), n, filter_spec)


def _machine_points(config, replicate, machine, count) -> np.ndarray:
    seed = points_stream_seed(config.base_seed, replicate, machine)
    if config.sampling == "random_uniform":
        return random_uniform_points(count, seed)
    return random_density_points(count, demo_density, DEMO_DENSITY_BOUND, seed)


def _random_sweep_moments(config, m, n, replicates):
    """Per-replicate, per-machine raw moments for the random-sampling modes.

    Every machine draws fresh points in every replicate and carries solved,
    thresholded degree-n weights, so unlike the rotated-design path the
    moments are degree-specific.  Returns moments[replicate][machine]."""
    target = WendlandTarget()
    count = len(base_rule(config))
    L = 2 * n - 1

    def one(job):
        k, j = job
        pts = _machine_points(config, k, j, count)
        w = _solved_rule(pts, n).weights
        eps = noise_stream(config.base_seed, k, j).standard_normal(count)
        stacked = np.stack([w * np.asarray(target(pts)), w * eps], axis=1)
        out = np.empty(((L + 1) ** 2, 2))
        for ell, block in harmonic_blocks(pts, L):
            out[ell * ell : (ell + 1) ** 2] = block.T @ stacked
        return out

    jobs = [(k, j) for k in range(replicates) for j in range(1, m + 1)]
    if config.workers <= 1:
        results = [one(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(one, jobs))
    it = iter(results)
    return [[next(it) for _ in range(m)] for _ in range(replicates)]


def _random_cell_errors(moments_by_rep, grid, filter_spec, n, sigma, replicates):
    eta = _degree_weights(filter_spec, n)
    size = len(eta)
    errors = []
    for machines in moments_by_rep[:replicates]:
        coeffs = np.zeros(size)
        for mom in machines:
            coeffs += mom[:size, 0] + sigma * mom[:size, 1]
        errors.append(grid.error_of(eta * (coeffs / len(machines))))
    return errors


def run_cell(config: ExperimentConfig, n: int, sigma: float, m: int, replicate: int) -> tuple:
    """Reference (unoptimized) fit of one sweep cell.

    Returns (estimator, error).  Used by the CLI and by tests to confirm
    that sweep rows are reproducible one cell at a time.
    """
    target = WendlandTarget()
    base = base_rule(config)
    rules = rotated_rules(base, m)
    datasets = []
    for j, rule in enumerate(rules, start=1):
        clean = target(rule.nodes)
        eps = noise_stream(config.base_seed, replicate, j).standard_normal(len(rule.nodes))
        datasets.append(NoisyDataset(rule.nodes, clean + sigma * eps, machine_id=j))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExactnessWarning)
        est = fit_distributed(datasets, rules, n, config.filter_spec, parallelism=config.workers)
    grid = _EvalGrid(config.eval_points, target)
    error = grid.error_of(est.global_harmonic_coefficients())
    return est, error


# ---------------------------------------------------------------------------
# Slope estimation and output emission
# ---------------------------------------------------------------------------

def fit_loglog_slope(rows, x_min: float, x_max: float) -> SlopeFit:
    """Ordinary least squares of log(mean error) on log(x) over a window.

    Raises ValueError when fewer than two rows fall inside the window or
    any windowed error is nonpositive.
    """
    pts = [(r.x, r.mean_error) for r in rows if x_min <= r.x <= x_max and r.x > 0]
    if len(pts) < 2:
        raise ValueError("need at least two rows with positive x in the window")
    if any(y <= 0 for _, y in pts):
        raise ValueError("log-log fit needs positive errors")
    lx = np.log([p[0] for p in pts])
    ly = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return SlopeFit(slope=float(slope), prefactor=float(math.exp(intercept)), residual=resid)


CSV_HEADER = "x,mean_error,std_error,replicates,within_theory,seconds"


def rows_to_csv(rows) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.x!r},{r.mean_error!r},{r.std_error!r},{r.replicates},"
            f"{'true' if r.within_theory else 'false'},{r.seconds!r}"
        )
    return "\n".join(lines) + "\n"


def emit_outputs(rows, path, formats=("csv",), xlabel="x", label=None) -> list[Path]:
    """Write one curve: CSV always named <path>.csv, optional figure files.

    CSV bytes are a pure function of the rows.  Formats may include "csv",
    "svg" and "png"; figures show the curve on log-log axes with a fitted
    slope line when two or more usable points exist.
    """
    return emit_curves({label or "errors": rows}, path, formats, xlabel)


def emit_curves(curves: dict, path, formats=("csv",), xlabel="x") -> list[Path]:
    """Write several labelled curves: one CSV per curve plus a combined
    figure.  With a single curve the CSV is <path>.csv; otherwise
    <path>_<label>.csv."""
    base = Path(path)
    base.parent.mkdir(parents=True, exist_ok=True)
    formats = [f.strip() for f in formats if f.strip()]
    unknown = set(formats) - {"csv", "svg", "png"}
    if unknown:
        raise ValueError(f"unknown output formats: {sorted(unknown)}")
    written = []
    if "csv" in formats:
        for label, rows in curves.items():
            target = (
                base.with_suffix(".csv")
                if len(curves) == 1
                else base.parent / f"{base.name}_{_safe(label)}.csv"
            )
            with open(target, "w", newline="\n") as fh:
                fh.write(rows_to_csv(rows))
            written.append(target)
    figure_formats = [f for f in formats if f in ("svg", "png")]
    if figure_formats:
        written.extend(_render_figure(curves, base, figure_formats, xlabel))
    return written


def _safe(label: str) -> str:
    return "".join(c if (c.isalnum() or c in "._-") else "-" for c in str(label))


def _render_figure(curves, base: Path, formats, xlabel) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg", force=False)
    matplotlib.rcParams["svg.hashsalt"] = "spherefit"
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    markers = ["o", "s", "^", "d", "v", "p", "*"]
    for i, (label, rows) in enumerate(curves.items()):
        pts = [(r.x, r.mean_error) for r in rows if r.x > 0 and r.mean_error > 0]
        if not pts:
            continue
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        text = str(label)
        if len(pts) >= 2:
            q = np.polyfit(np.log(xs), np.log(ys), 1)
            ax.loglog(xs, np.exp(q[0] * np.log(xs) + q[1]), "k--", lw=0.6)
            text += f" (slope {q[0]:.2f})"
        ax.loglog(xs, ys, marker=markers[i % len(markers)], ms=5, label=text)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("L2 error")
    ax.grid(True, which="both", lw=0.3, alpha=0.5)
    ax.legend(fontsize=8)
    written = []
    for fmt in formats:
        out = base.parent / f"{base.name}.{fmt}"
        fig.savefig(out, bbox_inches="tight", metadata={"Date": None} if fmt == "svg" else None)
        written.append(out)
    plt.close(fig)
    return written
