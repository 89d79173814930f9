"""Quadrature rules on the two-sphere.

All rules use Lebesgue normalization: a rule exact for constants has weights
summing to 4*pi.  Design files are plain text, one node per line as three
whitespace-separated Cartesian coordinates; blank lines and lines starting
with '#' are ignored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .basis import FOUR_PI, harmonic_analysis, harmonic_table
from .geometry import as_point_set

PROVENANCES = ("design_file", "equal_weight", "solved_random")


class DesignFileError(ValueError):
    """Malformed design file."""


class QuadratureSolveError(RuntimeError):
    """Weight solving failed (infeasible, ill-conditioned, or out of spec)."""


@dataclass(frozen=True)
class QuadratureRule:
    """Paired nodes and weights with a claimed polynomial-exactness degree.

    The claim is metadata; verify it with `exactness_residual`.  Weights must
    be nonnegative except for `equal_weight` provenance (where they are
    uniform anyway).
    """

    nodes: np.ndarray
    weights: np.ndarray
    claimed_degree: int
    provenance: str

    def __post_init__(self):
        nodes = as_point_set(self.nodes)
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (len(nodes),):
            raise ValueError("weights and nodes must have equal length")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.claimed_degree < 0:
            raise ValueError("claimed degree must be >= 0")
        if self.provenance in ("design_file", "solved_random") and np.any(weights < 0):
            raise ValueError(f"{self.provenance} rules must have nonnegative weights")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        nodes.setflags(write=False)
        weights.setflags(write=False)

    def __len__(self) -> int:
        return len(self.weights)


def moment_vector(n: int) -> np.ndarray:
    """Lebesgue integrals of all orthonormal harmonics up to degree n:
    sqrt(4*pi) for the constant harmonic, zero otherwise.  Length (n+1)^2."""
    m = np.zeros((n + 1) ** 2)
    m[0] = math.sqrt(FOUR_PI)
    return m


def parse_design_text(text: str) -> np.ndarray:
    """Parse design-file content into an (N, 3) node array."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) != 3:
            raise DesignFileError(f"line {lineno}: expected 3 coordinates, got {len(fields)}")
        try:
            rows.append([float(v) for v in fields])
        except ValueError:
            raise DesignFileError(f"line {lineno}: non-numeric coordinate") from None
    if not rows:
        raise DesignFileError("design file contains no nodes")
    return np.asarray(rows)


def load_design(path, t: int) -> QuadratureRule:
    """Load an equal-weight design from a text file, claiming strength t.

    Nodes are renormalized to unit length; weights are 4*pi/N.  Exactness is
    not verified here; run `exactness_residual(rule, t)`.
    """
    text = Path(path).read_text()
    nodes = as_point_set(parse_design_text(text))
    n = len(nodes)
    return QuadratureRule(nodes, np.full(n, FOUR_PI / n), t, "design_file")


def save_design(path, nodes) -> None:
    """Write nodes in the design-file format (17 significant digits)."""
    pts = as_point_set(nodes)
    lines = ["%.17e %.17e %.17e" % tuple(p) for p in pts]
    Path(path).write_text("\n".join(lines) + "\n")


def equal_weight_rule(points, claimed_degree: int = 0) -> QuadratureRule:
    """Wrap arbitrary points as an equal-weight rule (weights 4*pi/N).

    The claimed degree is stored verbatim and not validated."""
    pts = as_point_set(points)
    n = len(pts)
    return QuadratureRule(pts, np.full(n, FOUR_PI / n), claimed_degree, "equal_weight")


def exactness_residual(rule: QuadratureRule, L: int) -> float:
    """Largest absolute moment error over all harmonics of degree <= L."""
    if L < 0:
        raise ValueError("degree must be >= 0")
    moments = harmonic_analysis(rule.nodes, rule.weights, L)
    return float(np.max(np.abs(moments - moment_vector(L))))


def passes_at(rule: QuadratureRule, L: int, rel_tol: float = 1e-9) -> bool:
    """A rule passes at degree L if its residual is within rel_tol of the
    total absolute weight."""
    return exactness_residual(rule, L) <= rel_tol * float(np.sum(np.abs(rule.weights)))


def solve_weights(points, n: int, *, residual_tol: float = 1e-8) -> QuadratureRule:
    """Nonnegative, near-uniform weights making the points exact to degree n.

    Minimizes sum (w_i - 4*pi/N)^2 subject to exact harmonic moments up to
    degree n; negative entries are then eliminated by an active-set loop
    (pin at zero, re-solve, release when the sign of the multiplier allows).

    Raises
    ------
    QuadratureSolveError
        If the moment matrix is rank-deficient, the active set cannot reach
        the residual tolerance, or the solved weights violate the spread
        bound sum (w_i/(4*pi))^2 <= 2/N.
    """
    pts = as_point_set(points)
    N = len(pts)
    n_mom = (n + 1) ** 2
    if n < 0:
        raise ValueError("degree must be >= 0")
    if N <= n_mom:
        raise ValueError(f"need more points than moments: N = {N} <= (n+1)^2 = {n_mom}")
    if len(np.unique(pts, axis=0)) != N:
        raise ValueError("points must be pairwise distinct")

    A = harmonic_table(pts, n).T  # (n_mom, N)
    b = moment_vector(n)
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise QuadratureSolveError(
            "moment matrix is rank-deficient: points too clustered or N too small"
        )

    w0 = np.full(N, FOUR_PI / N)
    free = np.ones(N, dtype=bool)
    zero_tol = 1e-13 * FOUR_PI / N

    def resolve(mask):
        Af = A[:, mask]
        w = np.zeros(N)
        delta, *_ = np.linalg.lstsq(Af, b - Af @ w0[mask], rcond=None)
        w[mask] = w0[mask] + delta
        return w, delta

    w, delta = resolve(free)
    for _ in range(200):
        negative = free & (w < -zero_tol)
        if negative.any():
            # pin the most negative weight and re-solve
            idx = np.argmin(np.where(negative, w, np.inf))
            free[idx] = False
            if free.sum() <= n_mom:
                raise QuadratureSolveError("active set exhausted the free weights")
            w, delta = resolve(free)
            continue
        # KKT check: multipliers of pinned weights must be nonnegative
        if free.all():
            break
        lam, *_ = np.linalg.lstsq(A[:, free].T, delta, rcond=None)
        mu = -(w0 + A.T @ lam)
        pinned = ~free
        worst = np.argmin(np.where(pinned, mu, np.inf))
        if mu[worst] >= -zero_tol:
            break
        free[worst] = True
        w, delta = resolve(free)
    else:
        raise QuadratureSolveError("active-set iteration limit reached")

    w = np.where(np.abs(w) < zero_tol, 0.0, w)
    if np.any(w < 0):
        raise QuadratureSolveError("active set left negative weights")
    residual = float(np.max(np.abs(A @ w - b)))
    if residual > residual_tol * FOUR_PI:
        raise QuadratureSolveError(f"moment residual {residual:.3e} exceeds tolerance")
    spread = float(np.sum((w / FOUR_PI) ** 2))
    if spread > 2.0 / N:
        raise QuadratureSolveError(
            f"weight spread sum (w/4pi)^2 = {spread:.3e} exceeds 2/N = {2.0 / N:.3e}"
        )
    return QuadratureRule(pts, w, n, "solved_random")


def threshold_weights(rule: QuadratureRule) -> QuadratureRule:
    """Guard for rules on random nodes: if sum (w_i/(4*pi))^2 > 2/N, zero out
    every weight (the fitted estimator then vanishes identically).
    Idempotent; rules within the bound are returned unchanged."""
    if rule.provenance != "solved_random":
        raise ValueError("thresholding applies to solved_random rules")
    n = len(rule)
    if float(np.sum((rule.weights / FOUR_PI) ** 2)) <= 2.0 / n:
        return rule
    return QuadratureRule(rule.nodes, np.zeros(n), rule.claimed_degree, "solved_random")


# ---------------------------------------------------------------------------
# Bundled designs
# ---------------------------------------------------------------------------

def _design_dir():
    return resources.files("spherefit") / "designs"


def bundled_design_strengths() -> list[int]:
    """Strengths of the symmetric designs shipped with the package."""
    manifest = json.loads((_design_dir() / "MANIFEST.json").read_text())
    return sorted(int(k) for k in manifest)


def bundled_design(t: int) -> QuadratureRule:
    """Load the bundled design of strength exactly t, or the smallest
    bundled strength >= t."""
    manifest = json.loads((_design_dir() / "MANIFEST.json").read_text())
    available = sorted(int(k) for k in manifest)
    usable = [s for s in available if s >= t]
    if not usable:
        raise ValueError(f"no bundled design of strength >= {t} (have {available})")
    s = usable[0]
    entry = manifest[str(s)]
    with resources.as_file(_design_dir() / entry["file"]) as path:
        return load_design(path, s)
