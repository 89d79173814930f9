"""Filtered hyperinterpolation of noisy spherical data, local and distributed.

A local fit combines quadrature weights w_i, observations y_i and a filtered
kernel K_n into the polynomial sum_i w_i y_i K_n(x_i . x).  The same
polynomial carries a second, equivalent representation as a truncated
harmonic expansion with coefficients eta(l/n) * sum_i w_i y_i Y_{l,m}(x_i);
both are populated at fit time and cross-checkable at evaluation time.

The distributed estimator is the data-proportional weighted average of
independent local fits, one per machine.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import (
    FilteredKernel,
    FilterSpec,
    clenshaw_gegenbauer,
    harmonic_blocks,
    harmonic_synthesis,
)
from .geometry import as_point_set

PARTITION_POLICIES = ("block", "round_robin", "rotated_designs")


class ExactnessWarning(UserWarning):
    """Quadrature claims less exactness than the fit degree calls for."""


@dataclass(frozen=True)
class NoisyDataset:
    """Sampling points paired with (possibly noisy) observations."""

    points: np.ndarray
    values: np.ndarray
    machine_id: int | None = None

    def __post_init__(self):
        pts = as_point_set(self.points)
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (len(pts),):
            raise ValueError("values and points must have equal length")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class LocalEstimator:
    """One machine's fitted filtered hyperinterpolant."""

    degree: int
    kernel: FilteredKernel
    nodes: np.ndarray
    combined_coefficients: np.ndarray   # w_i * y_i, per node
    harmonic_coefficients: np.ndarray   # length (2n)^2, flat (l, m) order

    def __len__(self) -> int:
        return len(self.combined_coefficients)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.combined_coefficients)

    def __call__(self, x, path: str = "auto"):
        return eval_local(self, x, path)


@dataclass(frozen=True)
class DistributedEstimator:
    """Data-proportional weighted average of local estimators."""

    locals: tuple[LocalEstimator, ...]
    mix_weights: np.ndarray

    def __post_init__(self):
        mw = np.asarray(self.mix_weights, dtype=float)
        if len(mw) != len(self.locals) or len(mw) == 0:
            raise ValueError("one mix weight per local estimator required")
        if np.any(mw < 0):
            raise ValueError("mix weights must be nonnegative")
        if abs(mw.sum() - 1.0) > 1e-12:
            raise ValueError("mix weights must sum to 1")
        object.__setattr__(self, "mix_weights", mw)
        object.__setattr__(self, "locals", tuple(self.locals))

    def global_harmonic_coefficients(self) -> np.ndarray:
        """Harmonic coefficients of the averaged polynomial (degrees padded
        to the largest local table)."""
        size = max(len(est.harmonic_coefficients) for est in self.locals)
        out = np.zeros(size)
        for mix, est in zip(self.mix_weights, self.locals):
            c = est.harmonic_coefficients
            out[: len(c)] += mix * c
        return out

    def __call__(self, x):
        return eval_distributed(self, x)


def fit_local(
    data: NoisyDataset,
    rule,
    n: int,
    filter_spec: FilterSpec | None = None,
) -> LocalEstimator:
    """Fit the degree-n filtered hyperinterpolant to one dataset.

    The rule's nodes must be the dataset's points, index by index.  For
    deterministic designs the quadrature should be exact to degree 3n-1;
    a weaker claim only triggers an `ExactnessWarning` since deliberate
    under-resolution is a legitimate experiment.
    """
    if n < 1:
        raise ValueError("fit degree must be >= 1")
    filter_spec = filter_spec or FilterSpec()
    if len(rule.nodes) != len(data):
        raise ValueError("rule and dataset sizes differ")
    if not np.array_equal(rule.nodes, data.points):
        raise ValueError("rule nodes must match dataset points index by index")
    if rule.provenance != "solved_random" and rule.claimed_degree < 3 * n - 1:
        warnings.warn(
            f"rule claims degree {rule.claimed_degree} < 3n-1 = {3 * n - 1}; "
            "polynomial reproduction is not guaranteed",
            ExactnessWarning,
            stacklevel=2,
        )
    kernel = FilteredKernel(n, 2, filter_spec)
    combined = rule.weights * data.values
    L = 2 * n - 1
    eta = filter_spec.value(np.arange(L + 1) / n)
    coeffs = np.empty((L + 1) ** 2)
    for ell, block in harmonic_blocks(data.points, L):
        coeffs[ell * ell : (ell + 1) ** 2] = eta[ell] * (block.T @ combined)
    return LocalEstimator(n, kernel, data.points, combined, coeffs)


def eval_local(est: LocalEstimator, x, path: str = "auto"):
    """Evaluate a local estimator at a point or point set.

    path="kernel_sum" runs the Clenshaw kernel sum over the nodes,
    path="harmonic_synthesis" evaluates the harmonic expansion; "auto"
    chooses synthesis when the node count exceeds the expansion size
    (cheaper per evaluation).  The two paths agree to ~1e-9 relative.
    """
    if path == "auto":
        path = "harmonic_synthesis" if len(est) > (2 * est.degree) ** 2 else "kernel_sum"
    if path == "harmonic_synthesis":
        return harmonic_synthesis(est.harmonic_coefficients, x)
    if path != "kernel_sum":
        raise ValueError(f"unknown evaluation path {path!r}")
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    dots = np.clip(est.nodes @ (pts.reshape(-1, 3)).T, -1.0, 1.0)  # (N, P)
    vals = est.combined_coefficients @ clenshaw_gegenbauer(est.kernel.coefficients, 2, dots)
    return float(vals[0]) if single else vals


def partition(data: NoisyDataset, m: int, policy: str = "block") -> list[NoisyDataset]:
    """Split a dataset into m disjoint shards covering the input.

    "block" hands out contiguous runs (sizes differing by at most one),
    "round_robin" deals indices cyclically.  "rotated_designs" is not a
    splitting policy: it directs the experiment driver to sample each
    machine's data on its own rotated design, so it is rejected here.
    """
    if policy not in PARTITION_POLICIES:
        raise ValueError(f"unknown partition policy {policy!r}")
    if policy == "rotated_designs":
        raise ValueError(
            "rotated_designs generates per-machine data in the experiment "
            "driver; it does not partition an existing dataset"
        )
    if m < 1:
        raise ValueError("machine count must be >= 1")
    if m > len(data):
        raise ValueError(f"cannot split {len(data)} points across {m} machines")
    indices = np.arange(len(data))
    groups = np.array_split(indices, m) if policy == "block" else [indices[j::m] for j in range(m)]
    return [
        NoisyDataset(data.points[g], data.values[g], machine_id=j)
        for j, g in enumerate(groups)
    ]


def fit_distributed(
    datasets,
    rules,
    n: int,
    filter_spec: FilterSpec | None = None,
    parallelism: int = 1,
) -> DistributedEstimator:
    """Fit every machine independently and average data-proportionally.

    Local fits run concurrently up to `parallelism` workers; each fit is a
    pure function of its own inputs, so the result does not depend on the
    schedule.  The first failing machine's error is re-raised with its index.
    """
    datasets = list(datasets)
    rules = list(rules)
    if len(datasets) != len(rules) or not datasets:
        raise ValueError("need one rule per dataset, at least one machine")
    sizes = np.array([len(d) for d in datasets], dtype=float)

    def one(j):
        return fit_local(datasets[j], rules[j], n, filter_spec)

    if parallelism <= 1 or len(datasets) == 1:
        results = []
        for j in range(len(datasets)):
            try:
                results.append(one(j))
            except Exception as exc:
                raise RuntimeError(f"machine {j}: local fit failed") from exc
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = [pool.submit(one, j) for j in range(len(datasets))]
        results = []
        for j, fut in enumerate(futures):
            exc = fut.exception()
            if exc is not None:
                raise RuntimeError(f"machine {j}: local fit failed") from exc
            results.append(fut.result())
    return DistributedEstimator(tuple(results), sizes / sizes.sum())


def eval_distributed(est: DistributedEstimator, x):
    """Mix-weighted sum of the local evaluations at x."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    out = np.zeros(1 if single else len(pts))
    for mix, local in zip(est.mix_weights, est.locals):
        out = out + mix * np.atleast_1d(eval_local(local, pts))
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# Serialization: degree, filter, harmonic coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HarmonicModel:
    """Self-contained evaluatable form of a fitted estimator."""

    degree: int
    filter_spec: FilterSpec
    coefficients: np.ndarray

    def __call__(self, x):
        return harmonic_synthesis(self.coefficients, x)


def as_model(est) -> HarmonicModel:
    if isinstance(est, LocalEstimator):
        return HarmonicModel(est.degree, est.kernel.filter_spec, est.harmonic_coefficients)
    if isinstance(est, DistributedEstimator):
        first = est.locals[0]
        return HarmonicModel(
            first.degree, first.kernel.filter_spec, est.global_harmonic_coefficients()
        )
    if isinstance(est, HarmonicModel):
        return est
    raise TypeError(f"cannot serialize {type(est).__name__}")


def save_model(est, path) -> None:
    model = as_model(est)
    payload = {
        "degree": model.degree,
        "filter": {"kind": model.filter_spec.kind, "kappa": model.filter_spec.kappa},
        "coefficients": [float(c) for c in model.coefficients],
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def load_model(path) -> HarmonicModel:
    payload = json.loads(Path(path).read_text())
    coeffs = np.asarray(payload["coefficients"], dtype=float)
    size = int(round(math.sqrt(len(coeffs))))
    if size * size != len(coeffs):
        raise ValueError("coefficient table is not a full harmonic expansion")
    spec = FilterSpec(payload["filter"]["kind"], int(payload["filter"]["kappa"]))
    return HarmonicModel(int(payload["degree"]), spec, coeffs)


def suggested_degree(total_size: int, smoothness: float, d: int = 2, beta: float = 1.0) -> int:
    """Fit degree n = round(beta * |D|^(1/(2r+d))) suggested by the
    convergence theory for data size |D| and target smoothness r."""
    if total_size < 1 or smoothness <= 0:
        raise ValueError("need positive data size and smoothness")
    return max(1, round(beta * total_size ** (1.0 / (2.0 * smoothness + d))))


def within_theory(total_size: int, min_shard: int, smoothness: float, d: int = 2) -> bool:
    """Advisory flag: does the smallest shard satisfy the machine-count
    condition min_j |D_j| >= |D|^(d/(2r+d)) of the distributed-rate theory?"""
    return min_shard >= total_size ** (d / (2.0 * smoothness + d))
