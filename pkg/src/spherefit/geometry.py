"""Point sets, geodesic geometry and point generators on the unit two-sphere.

Points are plain float64 arrays: a single point has shape (3,), a point set
has shape (N, 3) with one point per row.  Row order is significant; it pairs
points with quadrature weights and observations elsewhere in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNIT_TOL = 1e-12

# Azimuth increment of the generalized equal-area spiral: the golden angle
# pi*(3 - sqrt(5)) ~ 2.399963 rad.
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def unit_point(coords) -> np.ndarray:
    """Return coords renormalized to a unit vector of shape (3,)."""
    p = np.asarray(coords, dtype=float).reshape(3)
    r = float(np.linalg.norm(p))
    if not np.isfinite(r) or r == 0.0:
        raise ValueError("cannot normalize a zero or non-finite vector")
    return p / r


def as_point_set(points) -> np.ndarray:
    """Validate and renormalize an (N, 3) array of points on the sphere.

    Idempotent: rows already unit to within UNIT_TOL are returned unchanged,
    so wrapping the same array twice cannot perturb coordinates."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1 and pts.size == 3:
        pts = pts.reshape(1, 3)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
        raise ValueError(f"expected an (N, 3) array with N >= 1, got shape {pts.shape}")
    norms = np.linalg.norm(pts, axis=1)
    if not np.all(np.isfinite(norms)) or np.any(norms == 0.0):
        raise ValueError("point set contains zero or non-finite rows")
    if np.all(np.abs(norms - 1.0) <= UNIT_TOL):
        return pts
    return pts / norms[:, None]


def geodesic_distance(x, y) -> float:
    """Great-circle distance arccos(x . y), with the dot clamped to [-1, 1].

    Identical inputs return exactly 0 (a unit vector's rounded self-dot can
    fall below 1, which arccos would turn into ~1e-8)."""
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if np.array_equal(a, b):
        return 0.0
    d = float(np.dot(a, b))
    return math.acos(min(1.0, max(-1.0, d)))


def pairwise_geodesic(points, other=None) -> np.ndarray:
    """All geodesic distances between rows of `points` and rows of `other`.

    Returns an (N, M) matrix; `other` defaults to `points` itself, in which
    case the diagonal is exactly zero.
    """
    a = np.asarray(points, dtype=float)
    b = a if other is None else np.asarray(other, dtype=float)
    dots = np.clip(a @ b.T, -1.0, 1.0)
    out = np.arccos(dots)
    if other is None:
        np.fill_diagonal(out, 0.0)
    return out


@dataclass(frozen=True)
class MeshStats:
    """Covering/packing diagnostics of a point set, all in radians."""

    mesh_norm: float
    separation_radius: float
    mesh_ratio: float


def default_probe(points: np.ndarray) -> np.ndarray:
    """Probe grid used to approximate the covering radius: a spiral with
    20x the set's cardinality, at least 10,000 points."""
    n = max(20 * len(points), 10_000)
    return spiral_points(n)


def mesh_stats(points, probe=None) -> MeshStats:
    """Mesh norm (covering radius), separation radius and their ratio.

    The separation radius is exact (half the minimum pairwise geodesic
    distance).  The mesh norm is a lower bound of the true supremum,
    estimated as the largest probe-to-set distance over a dense probe grid.

    Raises
    ------
    ValueError
        If the set has fewer than two points or contains duplicates
        (separation radius zero).
    """
    pts = as_point_set(points)
    n = len(pts)
    if n < 2:
        raise ValueError("mesh statistics need at least two points")
    if len(np.unique(pts, axis=0)) != n:
        raise ValueError("duplicate points: separation radius is zero")
    sep = 0.5 * _min_pairwise_distance(pts)
    if sep <= 0.0:
        raise ValueError("duplicate points: separation radius is zero")
    grid = default_probe(pts) if probe is None else as_point_set(probe)
    h = 0.0
    for chunk in _chunks(grid, 4096):
        nearest = np.arccos(np.clip(chunk @ pts.T, -1.0, 1.0)).min(axis=1)
        h = max(h, float(nearest.max()))
    return MeshStats(mesh_norm=h, separation_radius=sep, mesh_ratio=h / sep)


def _min_pairwise_distance(pts: np.ndarray) -> float:
    best = -1.0  # largest dot product <=> smallest distance
    for i0, chunk in enumerate(_chunks(pts, 2048)):
        dots = chunk @ pts.T
        lo = i0 * 2048
        for r in range(len(chunk)):
            dots[r, lo + r] = -2.0  # mask the diagonal
        best = max(best, float(dots.max()))
    return math.acos(min(1.0, max(-1.0, best)))


def _chunks(arr: np.ndarray, size: int):
    for i in range(0, len(arr), size):
        yield arr[i : i + size]


def spiral_points(n: int) -> np.ndarray:
    """Generalized equal-area spiral: heights z_k = 1 - (2k-1)/n and azimuths
    advancing by the golden angle.  Deterministic."""
    if n < 1:
        raise ValueError("need at least one point")
    k = np.arange(1, n + 1, dtype=float)
    z = 1.0 - (2.0 * k - 1.0) / n
    phi = (k - 1.0) * GOLDEN_ANGLE
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    return as_point_set(pts)


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def random_uniform_points(n: int, seed) -> np.ndarray:
    """n i.i.d. uniform points on the sphere (normalized Gaussians).

    Deterministic for a given (n, seed); seed may be an integer or a
    numpy SeedSequence."""
    if n < 1:
        raise ValueError("need at least one point")
    rng = np.random.default_rng(_seed_sequence(seed))
    g = rng.standard_normal((n, 3))
    return as_point_set(g)


def random_density_points(n, density, density_max, seed) -> np.ndarray:
    """Rejection-sample n points from a density against the uniform measure.

    Parameters
    ----------
    density : callable
        Maps an (k, 3) array of unit points to k nonnegative values.  Must be
        bounded by `density_max`; for the fitting theory to apply it should
        also be bounded away from zero (caller's responsibility).
    density_max : float
        Rejection bound; proposals x are kept when u * density_max <= density(x).
    """
    if n < 1:
        raise ValueError("need at least one point")
    if density_max <= 0:
        raise ValueError("density_max must be positive")
    rng = np.random.default_rng(_seed_sequence(seed))
    out = np.empty((n, 3))
    got = 0
    while got < n:
        k = max(32, n - got)
        g = rng.standard_normal((k, 3))
        proposals = g / np.linalg.norm(g, axis=1)[:, None]
        u = rng.random(k)
        vals = np.asarray(density(proposals), dtype=float)
        if np.any(vals < 0):
            raise ValueError("density returned a negative value")
        if np.any(vals > density_max * (1.0 + 1e-12)):
            raise ValueError("density exceeds density_max: invalid rejection bound")
        accepted = proposals[u * density_max <= vals]
        take = min(len(accepted), n - got)
        out[got : got + take] = accepted[:take]
        got += take
    return out


def rotation_about_z(theta: float) -> np.ndarray:
    """Rotation matrix by angle theta about the third coordinate axis."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def check_rotation(matrix) -> np.ndarray:
    """Validate a proper rotation (orthogonal, det +1) and return it."""
    m = np.asarray(matrix, dtype=float)
    if m.shape != (3, 3):
        raise ValueError("rotation must be a 3x3 matrix")
    if not np.allclose(m.T @ m, np.eye(3), atol=1e-12):
        raise ValueError("matrix is not orthogonal")
    if abs(np.linalg.det(m) - 1.0) > 1e-12:
        raise ValueError("matrix is not a proper rotation (det != +1)")
    return m


def rotate_points(points, rotation) -> np.ndarray:
    """Apply a rotation to every point; output is renormalized."""
    pts = as_point_set(points)
    rot = check_rotation(rotation)
    return as_point_set(pts @ rot.T)
