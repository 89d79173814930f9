"""Ground-truth targets, noise models and error diagnostics for experiments.

The reference target is a sum of six compactly supported radial profiles
centered at the coordinate axes' intersections with the sphere; composed
with chordal distance and rescaled, it is smooth but not polynomial, which
makes it a good subject for convergence-rate studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import harmonic_blocks
from .fitting import NoisyDataset
from .geometry import as_point_set

WENDLAND_SCALE = 8.0 / (15.0 * math.sqrt(math.pi))

DEFAULT_CENTERS = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float
)


def wendland_raw(u):
    """Compactly supported radial profile (1-u)_+^8 (32u^3+25u^2+8u+1)."""
    uu = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(uu < 0):
        raise ValueError("argument must be nonnegative")
    base = np.maximum(0.0, 1.0 - uu)
    out = base**8 * (32.0 * uu**3 + 25.0 * uu**2 + 8.0 * uu + 1.0)
    return out if np.ndim(u) else float(out[0])


def wendland_normalized(u):
    """Rescaled profile phi(8u / (15 sqrt(pi))); positive for all chordal
    distances on the sphere (the zero of the raw profile sits beyond u=2)."""
    return wendland_raw(WENDLAND_SCALE * np.asarray(u, dtype=float))


@dataclass(frozen=True)
class WendlandTarget:
    """Sum of six radial bumps centered at +-e1, +-e2, +-e3 by default.

    argument_convention="euclidean_distance" (default) feeds the chordal
    distance |x - z| into the profile; "inner_product" feeds max(x . z, 0).
    """

    centers: np.ndarray = field(default_factory=lambda: DEFAULT_CENTERS.copy())
    argument_convention: str = "euclidean_distance"

    def __post_init__(self):
        object.__setattr__(self, "centers", as_point_set(self.centers))
        if self.argument_convention not in ("euclidean_distance", "inner_product"):
            raise ValueError(f"unknown convention {self.argument_convention!r}")

    def __call__(self, x):
        return target_eval(self, x)


def target_eval(target: WendlandTarget, x):
    """Evaluate the target at a point or point set."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    dots = pts.reshape(-1, 3) @ target.centers.T
    if target.argument_convention == "euclidean_distance":
        args = np.sqrt(np.maximum(0.0, 2.0 - 2.0 * dots))
    else:
        args = np.maximum(0.0, dots)
    vals = wendland_normalized(args).sum(axis=1)
    return float(vals[0]) if single else vals


@dataclass(frozen=True)
class NoiseModel:
    """Additive observation noise: kind "none", "gaussian" (std sigma) or
    "uniform_bounded" (|eps| <= bound always)."""

    kind: str = "gaussian"
    sigma: float = 0.1
    bound: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "uniform_bounded"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0 or self.bound < 0:
            raise ValueError("noise scale must be nonnegative")

    def sample(self, n: int, seed: int = 0) -> np.ndarray:
        """Draw n noise values; deterministic in (model seed, call seed)."""
        rng = np.random.default_rng(np.random.SeedSequence((self.seed, seed)))
        if self.kind == "none":
            return np.zeros(n)
        if self.kind == "gaussian":
            return self.sigma * rng.standard_normal(n)
        return self.bound * rng.uniform(-1.0, 1.0, n)


def sample_noisy(points, target, noise: NoiseModel, seed: int = 0) -> NoisyDataset:
    """Observations y_i = target(x_i) + eps_i on the given points."""
    pts = as_point_set(points)
    clean = np.atleast_1d(np.asarray(target(pts), dtype=float))
    return NoisyDataset(pts, clean + noise.sample(len(pts), seed))


def l2_error(approx, reference, eval_rule) -> float:
    """Quadrature estimate of the L2(S^2) distance between two functions.

    Both arguments are callables on point sets; the rule's weights should
    sum to about 4*pi for the value to approximate the true norm.
    """
    pts = eval_rule.nodes
    diff = np.asarray(approx(pts), dtype=float) - np.asarray(reference(pts), dtype=float)
    return math.sqrt(float(np.sum(eval_rule.weights * diff * diff)))


@dataclass(frozen=True)
class FourierDiagnostics:
    """Discrete harmonic coefficients of a function up to some degree."""

    coefficients: np.ndarray  # length (L+1)^2, flat (l, m) order

    @property
    def max_degree(self) -> int:
        return int(round(math.sqrt(len(self.coefficients)))) - 1

    def degree_energies(self) -> np.ndarray:
        """Summed squared coefficients per degree."""
        c = self.coefficients
        return np.array(
            [float(np.sum(c[l * l : (l + 1) ** 2] ** 2)) for l in range(self.max_degree + 1)]
        )


def fourier_coefficients(f, L: int, rule) -> FourierDiagnostics:
    """Discrete coefficients f_hat(l,m) = sum_k v_k f(y_k) Y_{l,m}(y_k).

    Faithful up to degree L when the rule resolves products f * Y, i.e.
    claims degree at least 2L for polynomial f."""
    vals = rule.weights * np.asarray(f(rule.nodes), dtype=float)
    out = np.empty((L + 1) ** 2)
    for ell, block in harmonic_blocks(rule.nodes, L):
        out[ell * ell : (ell + 1) ** 2] = block.T @ vals
    return FourierDiagnostics(out)


def sobolev_norm(diag: FourierDiagnostics, r: float) -> float:
    """Truncated Sobolev norm sqrt(sum ((1 + l(l+1))^(r/2) f_hat)^2)."""
    if r < 0:
        raise ValueError("smoothness must be nonnegative")
    total = 0.0
    for ell, energy in enumerate(diag.degree_energies()):
        lam = ell * (ell + 1.0)
        total += (1.0 + lam) ** r * energy
    return math.sqrt(total)


def parseval_l2_norm(diag: FourierDiagnostics) -> float:
    """L2 norm implied by the coefficients (Parseval)."""
    return math.sqrt(float(np.sum(diag.coefficients**2)))
