"""Gegenbauer polynomials, degree filters, filtered kernels and real
spherical harmonics.

Conventions
-----------
* ``gegenbauer_values`` evaluates the polynomials P_l normalized so that
  P_l(1) = 1 for every degree; on the two-sphere (d = 2) these are the
  Legendre polynomials.
* Real spherical harmonics are orthonormal with respect to the *unnormalized*
  surface measure on S^2 (total mass 4*pi), so Y_00 = 1/sqrt(4*pi).  Within
  degree l the 2l+1 functions are ordered m = -l..l: sine-type harmonics
  first, the zonal harmonic in the middle, cosine-type last.  The flat index
  of (l, m) is l*l + l + m, and a table truncated at degree L has (L+1)^2
  columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

FOUR_PI = 4.0 * math.pi


def sphere_area(d: int) -> float:
    """Surface measure of the unit d-sphere in R^(d+1)."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    return 2.0 * math.pi ** ((d + 1) / 2.0) / math.gamma((d + 1) / 2.0)


def harmonic_dimension(d: int, ell: int) -> int:
    """Dimension of the space of degree-ell spherical harmonics on S^d.

    Exact integer value; for d = 2 this is 2*ell + 1.
    """
    if d < 2 or ell < 0:
        raise ValueError("need d >= 2 and ell >= 0")
    if ell == 0:
        return 1
    # dim of harmonic polynomials = homogeneous(ell) - homogeneous(ell - 2)
    return math.comb(ell + d, d) - math.comb(ell + d - 2, d)


def space_dimension(d: int, L: int) -> int:
    """Dimension of the space of spherical polynomials of degree up to L."""
    return sum(harmonic_dimension(d, ell) for ell in range(L + 1))


def gegenbauer_values(d: int, L: int, t) -> np.ndarray:
    """Values of P_0..P_L at t, normalized so P_l(1) = 1.

    `t` may be a scalar or an array in [-1, 1]; the result has shape
    (L+1,) + shape(t).  Uses the stable three-term recurrence
       P_l = ((2l+d-3) t P_{l-1} - (l-1) P_{l-2}) / (l+d-2).
    """
    if d < 2 or L < 0:
        raise ValueError("need d >= 2 and L >= 0")
    tt = _check_argument(t)
    out = np.empty((L + 1,) + tt.shape)
    out[0] = 1.0
    if L >= 1:
        out[1] = tt
    for ell in range(2, L + 1):
        a = (2.0 * ell + d - 3.0) / (ell + d - 2.0)
        b = (ell - 1.0) / (ell + d - 2.0)
        out[ell] = a * tt * out[ell - 1] - b * out[ell - 2]
    return out if np.ndim(t) else out.reshape(L + 1)


def _check_argument(t) -> np.ndarray:
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(np.abs(tt) > 1.0 + 1e-12):
        raise ValueError("argument outside [-1, 1]")
    return np.clip(tt, -1.0, 1.0)


@lru_cache(maxsize=32)
def _bernstein_terms(kappa: int) -> tuple:
    n = 2 * kappa + 1
    return tuple((math.comb(n, k), k, n - k) for k in range(kappa + 1, n + 1))


def _smoothstep(kappa: int, u: np.ndarray) -> np.ndarray:
    """Order-kappa smoothstep: the degree 2*kappa+1 polynomial with S(0)=0,
    S(1)=1 and derivatives 1..kappa vanishing at both endpoints.

    Evaluated in Bernstein form (all terms nonnegative); the power basis
    cancels catastrophically near the endpoints, which matters because the
    filter's junction smoothness is verified by high-order differences."""
    u = np.clip(u, 0.0, 1.0)
    v = 1.0 - u
    out = np.zeros_like(u)
    for c, k, j in _bernstein_terms(kappa):
        out += c * u**k * v**j
    return out


@dataclass(frozen=True)
class FilterSpec:
    """Smooth degree cutoff of smoothness class C^kappa.

    kind="plateau": equal to 1 on [0, 1], 0 beyond 2, monotone smoothstep
    transition on [1, 2].  kind="needlet": supported on [1/2, 2] with the
    exact partition identity value(t)^2 + value(2t)^2 = 1 on [1/2, 1].
    """

    kind: str = "plateau"
    kappa: int = 5

    def __post_init__(self):
        if self.kind not in ("plateau", "needlet"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if not isinstance(self.kappa, int) or self.kappa < 1:
            raise ValueError("kappa must be an integer >= 1")

    def value(self, t):
        """Filter value at t >= 0 (scalar or array), in [0, 1]."""
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(tt < 0):
            raise ValueError("filter argument must be nonnegative")
        if self.kind == "plateau":
            out = np.where(tt <= 1.0, 1.0, 0.0)
            mid = (tt > 1.0) & (tt < 2.0)
            out = np.where(mid, 1.0 - _smoothstep(self.kappa, tt - 1.0), out)
        else:
            out = np.zeros_like(tt)
            rise = (tt >= 0.5) & (tt <= 1.0)
            fall = (tt > 1.0) & (tt < 2.0)
            out = np.where(rise, np.sin(0.5 * math.pi * _smoothstep(self.kappa, 2.0 * tt - 1.0)), out)
            out = np.where(fall, np.cos(0.5 * math.pi * _smoothstep(self.kappa, tt - 1.0)), out)
        return out if np.ndim(t) else float(out[0])


def filter_value(spec: FilterSpec, t):
    return spec.value(t)


@dataclass(frozen=True)
class FilteredKernel:
    """Zonal kernel K_n(t) = sum_l eta(l/n) (Z_l / |S^d|) P_l(t).

    A polynomial of degree at most 2n-1; the per-degree coefficients are
    precomputed at construction and evaluation runs a Clenshaw recurrence.
    """

    degree: int
    dim: int
    filter_spec: FilterSpec
    coefficients: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("kernel degree must be >= 1")
        if self.dim < 2:
            raise ValueError("sphere dimension must be >= 2")
        if self.coefficients is None:
            ells = np.arange(2 * self.degree)
            eta = self.filter_spec.value(ells / self.degree)
            dims = np.array([harmonic_dimension(self.dim, int(l)) for l in ells], dtype=float)
            coeffs = eta * dims / sphere_area(self.dim)
            object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=float))
        self.coefficients.setflags(write=False)

    def value(self, t):
        """Evaluate the kernel at t in [-1, 1] (scalar or array)."""
        tt = _check_argument(t)
        out = clenshaw_gegenbauer(self.coefficients, self.dim, tt)
        return out if np.ndim(t) else float(out[0])

    def l2_parseval(self) -> float:
        return kernel_l2_parseval(self)


def kernel_value(kernel: FilteredKernel, t):
    return kernel.value(t)


def kernel_l2_parseval(kernel: FilteredKernel) -> float:
    """Squared L2(S^2) norm of x' -> K_n(x . x'), exact via the addition
    theorem: sum_l eta(l/n)^2 Z_l / (4*pi).  Defined for dim = 2 only."""
    if kernel.dim != 2:
        raise ValueError("Parseval closed form is implemented for d = 2 only")
    n = kernel.degree
    ells = np.arange(2 * n)
    eta = kernel.filter_spec.value(ells / n)
    return float(np.sum(eta**2 * (2 * ells + 1)) / FOUR_PI)


def clenshaw_gegenbauer(coeffs, d: int, t) -> np.ndarray:
    """Clenshaw summation of sum_l c_l P_l(t) over the normalized Gegenbauer
    recurrence; vectorized over t."""
    c = np.asarray(coeffs, dtype=float)
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    L = len(c) - 1
    if L < 0:
        return np.zeros_like(tt)
    b1 = np.zeros_like(tt)
    b2 = np.zeros_like(tt)
    for k in range(L, -1, -1):
        alpha = (2.0 * k + d - 1.0) / (k + d - 1.0)  # multiplies t * b_{k+1}
        beta = -(k + 1.0) / (k + d)                  # multiplies b_{k+2}
        b1, b2 = c[k] + alpha * tt * b1 + beta * b2, b1
    return b1


# ---------------------------------------------------------------------------
# Real spherical harmonics on S^2
# ---------------------------------------------------------------------------

def harmonic_blocks(points, L: int):
    """Yield (ell, block) for ell = 0..L, where block has shape
    (npoints, 2*ell+1): the real orthonormal harmonics of degree ell at the
    given points, ordered m = -ell..ell.

    Runs the standard recurrence on fully normalized associated Legendre
    functions; memory stays O(npoints * L).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, 3)
    if L < 0:
        raise ValueError("degree must be >= 0")
    x, y, ct = pts[:, 0], pts[:, 1], pts[:, 2]
    rxy = np.hypot(x, y)
    st = rxy
    safe = rxy > 0
    cp = np.where(safe, np.divide(x, rxy, out=np.ones_like(x), where=safe), 1.0)
    sp = np.where(safe, np.divide(y, rxy, out=np.zeros_like(y), where=safe), 0.0)

    npts = len(pts)
    sqrt2 = math.sqrt(2.0)
    # cos(m phi), sin(m phi) tables, extended as the degree grows
    cosm = [np.ones(npts), cp]
    sinm = [np.zeros(npts), sp]

    prev2 = None                       # N_{l-2}^m, m = 0..l-2
    prev = np.empty((1, npts))         # N_{l-1}^m, m = 0..l-1
    prev[0] = 1.0 / math.sqrt(FOUR_PI)
    yield 0, prev[0][:, None].copy()

    for ell in range(1, L + 1):
        cur = np.empty((ell + 1, npts))
        for m in range(ell - 1):
            a = math.sqrt((4.0 * ell * ell - 1.0) / (ell * ell - m * m))
            b = math.sqrt(((ell - 1.0) ** 2 - m * m) / (4.0 * (ell - 1.0) ** 2 - 1.0))
            cur[m] = a * (ct * prev[m] - b * prev2[m])
        if ell >= 1:
            cur[ell - 1] = math.sqrt(2.0 * ell + 1.0) * ct * prev[ell - 1]
            cur[ell] = math.sqrt(1.0 + 0.5 / ell) * st * prev[ell - 1]
        if len(cosm) <= ell:
            cosm.append(cosm[-1] * cp - sinm[-1] * sp)
            sinm.append(sinm[-1] * cp + cosm[-2] * sp)
        block = np.empty((npts, 2 * ell + 1))
        block[:, ell] = cur[0]
        for m in range(1, ell + 1):
            block[:, ell + m] = sqrt2 * cur[m] * cosm[m]
            block[:, ell - m] = sqrt2 * cur[m] * sinm[m]
        yield ell, block
        prev2, prev = prev, cur


def harmonic_table(points, L: int) -> np.ndarray:
    """Full table of real orthonormal harmonics up to degree L, shape
    (npoints, (L+1)^2)."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    npts = 1 if single else len(pts)
    table = np.empty((npts, (L + 1) ** 2))
    for ell, block in harmonic_blocks(pts, L):
        table[:, ell * ell : (ell + 1) ** 2] = block
    return table[0] if single else table


def real_harmonics(L: int, point) -> np.ndarray:
    """Harmonic values at one point (or a point set) up to degree L."""
    return harmonic_table(point, L)


def harmonic_synthesis(coefficients, points) -> np.ndarray:
    """Evaluate sum_{l,m} c_{l,m} Y_{l,m} at the given points.

    `coefficients` has length (L+1)^2 in the flat (l, m) ordering."""
    c = np.asarray(coefficients, dtype=float)
    L = int(round(math.sqrt(len(c)))) - 1
    if (L + 1) ** 2 != len(c):
        raise ValueError("coefficient length must be a perfect square")
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    out = np.zeros(1 if single else len(pts))
    for ell, block in harmonic_blocks(pts, L):
        out += block @ c[ell * ell : (ell + 1) ** 2]
    return float(out[0]) if single else out


def harmonic_analysis(points, weights, L: int) -> np.ndarray:
    """Weighted sums sum_i w_i Y_{l,m}(x_i) for all (l, m) up to degree L;
    the discrete counterpart of Fourier analysis under a quadrature rule."""
    w = np.asarray(weights, dtype=float)
    out = np.empty((L + 1) ** 2)
    for ell, block in harmonic_blocks(points, L):
        out[ell * ell : (ell + 1) ** 2] = block.T @ w
    return out


def flat_index(ell: int, m: int) -> int:
    """Flat column index of the (ell, m) harmonic, m in -ell..ell."""
    if abs(m) > ell:
        raise ValueError("need |m| <= ell")
    return ell * ell + ell + m
