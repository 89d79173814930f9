#!/usr/bin/env python3
"""Generate the symmetric quadrature designs bundled with spherefit.

A symmetric design of odd strength t stores antipodal node pairs; moments of
odd-degree harmonics cancel exactly, so only the even-degree moments up to
t-1 have to be driven to zero.  That nonlinear system is solved here with a
damped Gauss-Newton (Levenberg-Marquardt) iteration on the free node pairs,
starting from an equal-area spiral on the upper hemisphere.

Every generated file is re-loaded and verified against the claimed strength
before it is recorded in MANIFEST.json together with its sha256 checksum.
Re-running the script reproduces identical files (fixed seeds).

Usage:
    python scripts/generate_designs.py [--only 45,47] [--out src/spherefit/designs]
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from spherefit.basis import FOUR_PI, harmonic_table  # noqa: E402
from spherefit.geometry import as_point_set, spiral_points  # noqa: E402
from spherefit.quadrature import exactness_residual, load_design, save_design  # noqa: E402

# strength -> number of antipodal pairs (about 20% more degrees of freedom
# than even-moment equations, which keeps Gauss-Newton well conditioned)
PAIR_COUNTS = {11: 44, 15: 77, 21: 146, 31: 308, 45: 635, 47: 691, 75: 1733}

FD_STEP = 1e-6
TARGET = 1e-12 * FOUR_PI


def even_index_mask(t: int) -> np.ndarray:
    """Flat harmonic-table columns of even degrees 2..t-1."""
    idx = []
    for ell in range(2, t, 2):
        idx.extend(range(ell * ell, (ell + 1) ** 2))
    return np.asarray(idx, dtype=int)


def even_moments(pairs: np.ndarray, t: int, idx: np.ndarray) -> np.ndarray:
    """Residual vector: Lebesgue-normalized even moments of the symmetric
    set {+-x_i} (weights 4*pi/N with N = 2*len(pairs))."""
    table = harmonic_table(pairs, t - 1)[:, idx]
    return (FOUR_PI / len(pairs)) * table.sum(axis=0)  # = (4pi/N) * 2 * sum


def jacobian_fd(pairs: np.ndarray, t: int, idx: np.ndarray) -> np.ndarray:
    """Central finite differences of the residual w.r.t. the (renormalized)
    Cartesian coordinates of each pair representative."""
    m = len(pairs)
    perturbed = np.repeat(pairs, 6, axis=0)
    for c in range(3):
        perturbed[2 * c::6, c] += FD_STEP
        perturbed[2 * c + 1::6, c] -= FD_STEP
    perturbed /= np.linalg.norm(perturbed, axis=1)[:, None]

    jac = np.empty((len(idx), 3 * m))
    scale = FOUR_PI / len(pairs) / (2.0 * FD_STEP)
    chunk = max(1, 600000 // max(len(idx), 1)) * 6
    for start in range(0, 6 * m, chunk):
        block = harmonic_table(perturbed[start:start + chunk], t - 1)[:, idx]
        for row in range(0, block.shape[0], 6):
            i = (start + row) // 6
            diffs = block[row:row + 6]
            for c in range(3):
                jac[:, 3 * i + c] = scale * (diffs[2 * c] - diffs[2 * c + 1])
    return jac


def solve_design(t: int, n_pairs: int, seed: int, max_iter: int = 300, verbose: bool = True):
    """Levenberg-Marquardt search for a symmetric design of strength t."""
    rng = np.random.default_rng(seed)
    pairs = spiral_points(2 * n_pairs)[:n_pairs]
    pairs = as_point_set(pairs + 1e-3 * rng.standard_normal(pairs.shape))
    idx = even_index_mask(t)

    r = even_moments(pairs, t, idx)
    lam = 1e-4
    for it in range(max_iter):
        rnorm = float(np.max(np.abs(r)))
        if verbose and (it % 10 == 0 or rnorm <= TARGET):
            print(f"  t={t} iter {it:3d}  max|moment| = {rnorm:.3e}  lambda = {lam:.1e}", flush=True)
        if rnorm <= TARGET:
            return pairs
        jac = jacobian_fd(pairs, t, idx)
        gram = jac @ jac.T
        diag = float(np.mean(np.diag(gram)))
        for _ in range(25):
            try:
                y = np.linalg.solve(gram + lam * diag * np.eye(len(gram)), -r)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            step = (jac.T @ y).reshape(n_pairs, 3)
            trial = as_point_set(pairs + step)
            r_trial = even_moments(trial, t, idx)
            if np.max(np.abs(r_trial)) < np.max(np.abs(r)):
                pairs, r = trial, r_trial
                lam = max(lam / 3.0, 1e-14)
                break
            lam *= 10.0
        else:
            raise RuntimeError(f"t={t}: no descent step found at iter {it}")
    raise RuntimeError(f"t={t}: not converged after {max_iter} iterations")


def symmetric_nodes(pairs: np.ndarray) -> np.ndarray:
    return np.vstack([pairs, -pairs])


def platonic_designs():
    """Closed-form designs: tetrahedron (t=2), octahedron (t=3),
    icosahedron (t=5)."""
    s3 = 1.0 / math.sqrt(3.0)
    tet = np.array([[s3, s3, s3], [s3, -s3, -s3], [-s3, s3, -s3], [-s3, -s3, s3]])
    octa = np.array(
        [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float
    )
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    s = 1.0 / math.sqrt(1.0 + phi * phi)
    ico = []
    for a, b in [(1.0, phi)]:
        for sa in (a, -a):
            for sb in (b, -b):
                ico.extend([[0.0, sa * s, sb * s], [sa * s, sb * s, 0.0], [sb * s, 0.0, sa * s]])
    return {2: tet, 3: octa, 5: as_point_set(np.array(ico))}


def write_design(out_dir: Path, t: int, nodes: np.ndarray, manifest: dict, started: float):
    name = f"sym_design_t{t:03d}_n{len(nodes):05d}.txt"
    path = out_dir / name
    save_design(path, nodes)
    rule = load_design(path, t)
    residual = exactness_residual(rule, t)
    limit = 1e-9 * FOUR_PI
    status = "ok" if residual <= limit else "FAILED"
    print(f"t={t:3d}  N={len(nodes):5d}  residual={residual:.3e}  ({status}, {time.time()-started:.1f}s)", flush=True)
    if residual > limit:
        raise RuntimeError(f"t={t}: verification failed with residual {residual:.3e}")
    manifest[str(t)] = {
        "file": name,
        "nodes": len(nodes),
        "residual": residual,
        "sha256": hashlib.sha256(path.read_bytes()).hexdigest(),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "src/spherefit/designs"))
    ap.add_argument("--only", default=None, help="comma-separated strengths to (re)generate")
    args = ap.parse_args()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "MANIFEST.json"
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}
    only = None if args.only is None else {int(v) for v in args.only.split(",")}

    for t, nodes in sorted(platonic_designs().items()):
        if only is not None and t not in only:
            continue
        write_design(out_dir, t, nodes, manifest, time.time())

    for t, n_pairs in sorted(PAIR_COUNTS.items()):
        if only is not None and t not in only:
            continue
        started = time.time()
        pairs = None
        for attempt, seed in enumerate([2024 + t, 777 + t, 31337 + t]):
            try:
                pairs = solve_design(t, n_pairs + attempt * max(4, n_pairs // 10), seed)
                break
            except RuntimeError as exc:
                print(f"  retry t={t}: {exc}", flush=True)
        if pairs is None:
            raise SystemExit(f"could not generate design of strength {t}")
        write_design(out_dir, t, symmetric_nodes(pairs), manifest, started)

    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"manifest written: {manifest_path}")


if __name__ == "__main__":
    main()
