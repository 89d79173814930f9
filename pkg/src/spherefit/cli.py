"""Command-line interface.

Subcommands
-----------
points spiral|random        generate point sets
quadrature check|solve      verify design exactness / solve node weights
fit                         fit one distributed estimator, save the model
eval                        evaluate a saved model, optionally report error
experiment degree|sigma|machines
                            run a sweep, write CSV (and figure) outputs

A flat key=value config file can seed any subcommand via --config; explicit
flags override file entries.  On failure a single JSON line
{"error": "..."} goes to stderr and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

FULL_PRESETS = {
    "degree": dict(t=75, machines="100", n="10,12,14,16,18,20,22,25", sigma="0,0.0001,0.001,0.01,0.1", replicates=10),
    "sigma": dict(t=75, machines="100", n="25", sigma="0.0001,0.001,0.01,0.1", replicates=10),
    "machines": dict(t=75, machines="10,20,50,100,200,500", n="25", sigma="0,0.0001,0.001,0.01,0.1", replicates=10),
}


def _int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value file; flags override it")
    p.add_argument("--design", help="design file path (overrides --t lookup)")
    p.add_argument("--t", type=int, default=None, help="design strength (bundled lookup)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--filter", dest="filter_kind", choices=("plateau", "needlet"), default="plateau")
    p.add_argument("--kappa", type=int, default=5)
    p.add_argument("--eval-points", type=int, default=10_000)
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    root = argparse.ArgumentParser(prog="spherefit", description=__doc__)
    sub = root.add_subparsers(dest="group", required=True)

    pts = sub.add_parser("points", help="generate point sets").add_subparsers(
        dest="mode", required=True
    )
    for mode in ("spiral", "random"):
        p = pts.add_parser(mode)
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)
        p.add_argument("--config", default=None)
        p.set_defaults(func=cmd_points)

    quad = sub.add_parser("quadrature", help="quadrature tools").add_subparsers(
        dest="mode", required=True
    )
    q = quad.add_parser("check")
    q.add_argument("--design", required=True)
    q.add_argument("--t", type=int, required=True)
    q.add_argument("--degree", type=int, default=None, help="degree to verify (default: t)")
    q.add_argument("--config", default=None)
    q.set_defaults(func=cmd_quadrature_check)
    q = quad.add_parser("solve")
    q.add_argument("--points", help="points file to solve weights on")
    q.add_argument("--random", type=int, default=None, help="draw N random points instead")
    q.add_argument("--n", type=int, required=True, help="exactness degree")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--threshold", action="store_true", help="apply the spread-bound guard")
    q.add_argument("--out", default=None)
    q.add_argument("--config", default=None)
    q.set_defaults(func=cmd_quadrature_solve)

    fit = sub.add_parser("fit", help="fit one distributed estimator")
    _common_flags(fit)
    fit.add_argument("--n", type=_int_list, required=True, help="fit degree")
    fit.add_argument("--machines", type=_int_list, default=[1])
    fit.add_argument("--sigma", type=_float_list, default=[0.0])
    fit.add_argument("--replicate", type=int, default=0, help="replicate index (seeds noise)")
    fit.add_argument("--workers", type=int, default=1)
    fit.set_defaults(func=cmd_fit)

    ev = sub.add_parser("eval", help="evaluate a saved model")
    ev.add_argument("--model", required=True)
    ev.add_argument("--points", help="evaluate at these points (file)")
    ev.add_argument("--eval-points", type=int, default=10_000)
    ev.add_argument("--error", action="store_true", help="report L2 error vs the built-in target")
    ev.add_argument("--out", default=None)
    ev.add_argument("--config", default=None)
    ev.set_defaults(func=cmd_eval)

    exp = sub.add_parser("experiment", help="run a sweep").add_subparsers(
        dest="mode", required=True
    )
    for mode in ("degree", "sigma", "machines"):
        p = exp.add_parser(mode)
        _common_flags(p)
        p.add_argument("--n", type=str, default=None, help="degree or degree list")
        p.add_argument("--machines", type=str, default=None)
        p.add_argument("--sigma", type=str, default=None)
        p.add_argument("--replicates", type=int, default=None)
        p.add_argument("--format", dest="formats", default="csv")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--full", action="store_true", help="full-scale configuration")
        p.add_argument("--fixed-total", action="store_true", help="partition one fixed dataset")
        p.add_argument("--total-data", type=int, default=4000)
        p.add_argument(
            "--sampling",
            choices=("rotated_designs", "random_uniform", "random_density"),
            default="rotated_designs",
        )
        p.add_argument("--smoothness", type=float, default=4.5)
        p.add_argument("--timing", action="store_true", help="record wall-clock seconds (breaks byte reproducibility)")
        p.set_defaults(func=cmd_experiment)

    return root


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_points(args) -> int:
    from .geometry import random_uniform_points, spiral_points

    pts = spiral_points(args.n) if args.mode == "spiral" else random_uniform_points(args.n, args.seed)
    text = "\n".join("%.17e %.17e %.17e" % tuple(p) for p in pts) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(json.dumps({"points": args.n, "out": args.out}))
    else:
        sys.stdout.write(text)
    return 0


def cmd_quadrature_check(args) -> int:
    from .basis import FOUR_PI
    from .quadrature import exactness_residual, load_design

    rule = load_design(args.design, args.t)
    degree = args.t if args.degree is None else args.degree
    residual = exactness_residual(rule, degree)
    passes = residual <= 1e-9 * float(np.sum(np.abs(rule.weights)))
    print(
        json.dumps(
            {
                "nodes": len(rule),
                "claimed_degree": rule.claimed_degree,
                "checked_degree": degree,
                "residual": residual,
                "relative_to_4pi": residual / FOUR_PI,
                "passes": passes,
            }
        )
    )
    return 0 if passes else 3


def cmd_quadrature_solve(args) -> int:
    from .basis import FOUR_PI
    from .geometry import as_point_set, random_uniform_points
    from .quadrature import exactness_residual, parse_design_text, solve_weights, threshold_weights

    if (args.points is None) == (args.random is None):
        raise ValueError("provide exactly one of --points or --random")
    if args.points:
        pts = as_point_set(parse_design_text(Path(args.points).read_text()))
    else:
        pts = random_uniform_points(args.random, args.seed)
    rule = solve_weights(pts, args.n)
    if args.threshold:
        rule = threshold_weights(rule)
    if args.out:
        lines = ["# x y z weight"]
        lines += [
            "%.17e %.17e %.17e %.17e" % (p[0], p[1], p[2], w)
            for p, w in zip(rule.nodes, rule.weights)
        ]
        Path(args.out).write_text("\n".join(lines) + "\n")
    print(
        json.dumps(
            {
                "nodes": len(rule),
                "degree": args.n,
                "residual": exactness_residual(rule, args.n),
                "spread": float(np.sum((rule.weights / FOUR_PI) ** 2)),
                "spread_bound": 2.0 / len(rule),
                "min_weight": float(rule.weights.min()),
                "out": args.out,
            }
        )
    )
    return 0


def cmd_fit(args) -> int:
    from .experiments import ExperimentConfig, run_cell
    from .fitting import save_model

    cfg = ExperimentConfig(
        kind="degree",
        degrees=tuple(args.n),
        machines=tuple(args.machines),
        sigmas=tuple(args.sigma),
        design_t=args.t if args.t is not None else 45,
        design_path=args.design,
        replicates=max(1, args.replicate + 1),
        base_seed=args.seed,
        eval_points=args.eval_points,
        filter_kind=args.filter_kind,
        kappa=args.kappa,
        workers=args.workers,
    )
    est, error = run_cell(cfg, args.n[0], args.sigma[0], args.machines[0], args.replicate)
    payload = {"n": args.n[0], "machines": args.machines[0], "sigma": args.sigma[0], "l2_error": error}
    if args.out:
        save_model(est, args.out)
        payload["model"] = args.out
    print(json.dumps(payload))
    return 0


def cmd_eval(args) -> int:
    from .fitting import load_model
    from .geometry import as_point_set, spiral_points
    from .quadrature import equal_weight_rule, parse_design_text
    from .testbed import WendlandTarget, l2_error

    model = load_model(args.model)
    if args.points:
        pts = as_point_set(parse_design_text(Path(args.points).read_text()))
    else:
        pts = spiral_points(args.eval_points)
    values = model(pts)
    payload = {"model": args.model, "points": len(pts)}
    if args.out:
        lines = ["x,y,z,value"]
        lines += [
            f"{float(p[0])!r},{float(p[1])!r},{float(p[2])!r},{float(v)!r}"
            for p, v in zip(pts, values)
        ]
        with open(args.out, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        payload["out"] = args.out
    if args.error:
        payload["l2_error"] = l2_error(model, WendlandTarget(), equal_weight_rule(pts, 0))
    print(json.dumps(payload))
    return 0


def cmd_experiment(args) -> int:
    from .experiments import (
        ExperimentConfig,
        emit_curves,
        fit_loglog_slope,
        run_degree_sweep,
        run_machines_sweep,
        run_sigma_sweep,
    )

    preset = FULL_PRESETS[args.mode] if args.full else {}

    def pick(flag, key, fallback):
        if flag is not None:
            return flag
        return preset.get(key, fallback)

    degrees = _int_list(pick(args.n, "n", "15"))
    machines = _int_list(pick(args.machines, "machines", "20"))
    sigmas = _float_list(pick(args.sigma, "sigma", "0.1"))
    replicates = pick(args.replicates, "replicates", 10)
    t = pick(args.t, "t", 45)

    cfg = ExperimentConfig(
        kind=args.mode,
        degrees=tuple(degrees),
        machines=tuple(machines),
        sigmas=tuple(sigmas),
        design_t=t,
        design_path=args.design,
        replicates=replicates,
        base_seed=args.seed,
        eval_points=args.eval_points,
        filter_kind=args.filter_kind,
        kappa=args.kappa,
        sampling=args.sampling,
        smoothness=args.smoothness,
        fixed_total=args.fixed_total,
        total_data=args.total_data,
        workers=args.workers,
        timing=args.timing,
    )
    formats = [f.strip() for f in args.formats.split(",")]
    out_base = args.out or f"spherefit_{args.mode}"

    if args.mode == "degree":
        curves = {f"sigma={s:g}": rows for s, rows in run_degree_sweep(cfg).items()}
        xlabel = "degree n"
    elif args.mode == "sigma":
        curves = {"errors": run_sigma_sweep(cfg)}
        xlabel = "noise level sigma"
    else:
        curves = {f"sigma={s:g}": rows for s, rows in run_machines_sweep(cfg).items()}
        xlabel = "machines m"

    written = emit_curves(curves, out_base, formats, xlabel)
    summary = {"out": [str(p) for p in written]}
    slopes = {}
    for label, rows in curves.items():
        xs = [r.x for r in rows if r.x > 0 and r.mean_error > 0]
        if len(xs) >= 2:
            fitspec = fit_loglog_slope(rows, min(xs), max(xs))
            slopes[label] = {"slope": fitspec.slope, "prefactor": fitspec.prefactor}
    summary["slopes"] = slopes
    print(json.dumps(summary))
    return 0


# ---------------------------------------------------------------------------
# Config file handling and entry point
# ---------------------------------------------------------------------------

def read_config_file(path) -> list[str]:
    """Turn key=value lines into CLI tokens (booleans become bare flags)."""
    tokens: list[str] = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        flag = "--" + key.strip().replace("_", "-")
        value = value.strip()
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                tokens.append(flag)
        else:
            tokens.extend([flag, value])
    return tokens


def _inject_config(argv: list[str]) -> list[str]:
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ValueError("--config needs a file path")
    tokens = read_config_file(argv[i + 1])
    rest = argv[:i] + argv[i + 2 :]
    n_cmd = 2 if rest and rest[0] in ("points", "quadrature", "experiment") else 1
    return rest[:n_cmd] + tokens + rest[n_cmd:]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _inject_config(argv)
        args = build_parser().parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # argparse errors already printed usage
        return int(exc.code or 0)
    except Exception as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
