"""Command line for solves, experiment sweeps, and validators.

Subcommands: ``solve`` (one instance, JSON trajectory), ``grid``
(success-probability sweep, CSV + optional PGM heatmap), ``stagnation``
(no-stagnation-probability sweep), ``mn-curve`` (measurement-count
thresholds), ``validate`` (numerical inequality checks).

Every subcommand that writes files also writes a ``<out>.manifest.json``
recording the full flag snapshot, seed, tool version, and artifact list;
re-running with that snapshot reproduces the data files byte for byte
(timestamps aside). The PRAP_SEED environment variable overrides the
default of ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone

import numpy as np

import prap
from prap.experiments import (
    GridResult,
    GridSpec,
    StagnationSpec,
    compute_mn_curve,
    mn_curve_to_csv,
    probe_stagnation,
    run_success_grid,
    validate_diff_phase,
    validate_min_f,
)
from prap.linalg import SingularGramError
from prap.model import SeedSpec, make_problem
from prap.solver import (
    EmptyTruncationError,
    INIT_RANDOM,
    INIT_SPECTRAL,
    SolverConfig,
    run_ap,
)

INIT_CHOICES = {"spectral": INIT_SPECTRAL, "random": INIT_RANDOM}


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    master_seed: int
    artifacts: list[str]
    tool_version: str
    started_at: str
    finished_at: str


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_manifest(out_path: str, subcommand: str, args: argparse.Namespace,
                    artifacts: list[str], started_at: str) -> None:
    manifest = RunManifest(
        subcommand=subcommand,
        config={k: v for k, v in vars(args).items() if k != "func"},
        master_seed=args.seed,
        artifacts=artifacts,
        tool_version=prap.__version__,
        started_at=started_at,
        finished_at=_now(),
    )
    with open(out_path + ".manifest.json", "w") as fh:
        json.dump(asdict(manifest), fh, indent=2)
        fh.write("\n")


def write_pgm(path: str, result: GridResult) -> None:
    """Binary portable graymap: gray = round(255 p), rows m ascending, cols n ascending."""
    ns = sorted({c.n for c in result.cells})
    ms = sorted({c.m for c in result.cells})
    grid = np.zeros((len(ms), len(ns)), dtype=np.uint8)
    for c in result.cells:
        grid[ms.index(c.m), ns.index(c.n)] = int(round(255 * c.probability))
    with open(path, "wb") as fh:
        fh.write(f"P5\n{len(ns)} {len(ms)}\n255\n".encode("ascii"))
        fh.write(grid.tobytes())


def _parse_int_list(text: str) -> list[int]:
    """Parse "8,16,32" or inclusive ranges "4:32" / "4:32:4"."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            pieces = [int(p) for p in part.split(":")]
            if len(pieces) == 2:
                lo, hi, step = pieces[0], pieces[1], 1
            elif len(pieces) == 3:
                lo, hi, step = pieces
            else:
                raise argparse.ArgumentTypeError(f"bad range {part!r}")
            out.extend(range(lo, hi + 1, step))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _default_seed() -> int:
    return int(os.environ.get("PRAP_SEED", "0"))


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    config = SolverConfig()
    if getattr(args, "iters", None) is not None:
        config = replace(config, max_iters=args.iters)
    if getattr(args, "success_tol", None) is not None:
        config = replace(config, success_tol=args.success_tol)
    if getattr(args, "init", None) is not None:
        config = replace(config, init_mode=INIT_CHOICES[args.init])
    return config


def _emit_grid(args, result: GridResult, subcommand: str, started_at: str) -> int:
    if args.format == "json":
        payload = json.dumps(result.to_json(), indent=2) + "\n"
    else:
        payload = result.to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload)
        artifacts = [args.out]
        if args.heatmap:
            write_pgm(args.heatmap, result)
            artifacts.append(args.heatmap)
        _write_manifest(args.out, subcommand, args, artifacts, started_at)
    else:
        sys.stdout.write(payload)
    for c in sorted(result.cells, key=lambda c: (c.n, c.m)):
        print(f"cell n={c.n} m={c.m}: probability={c.probability:.4g} "
              f"({c.successes}/{c.trials})", file=sys.stderr)
    return 0


def cmd_solve(args: argparse.Namespace) -> int:
    started_at = _now()
    seed = SeedSpec(args.seed, n=args.n, m=args.m)
    config = _solver_config(args)
    try:
        problem = make_problem(args.n, args.m, seed)
        traj = run_ap(problem, config, seed=seed.with_labels(stream_tag="init"))
    except (SingularGramError, EmptyTruncationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    final_rel = traj.rel_errors[-1] if traj.rel_errors else float("nan")
    if problem.uniqueness_warning:
        print(f"warning: m={args.m} < 4n-4={4 * args.n - 4}: "
              "solution may not be unique", file=sys.stderr)
    print(f"verdict={traj.verdict} iterations={traj.iterations_run} "
          f"final_rel_error={final_rel:.3e}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(traj.to_json(), fh, indent=2)
            fh.write("\n")
        _write_manifest(args.out, "solve", args, [args.out], started_at)
    return 0


def cmd_grid(args: argparse.Namespace) -> int:
    started_at = _now()
    spec = GridSpec(
        n_values=tuple(args.n),
        m_values=tuple(args.m) if args.m else None,
        m_rule=args.m_rule,
        trials=args.trials,
        master_seed=args.seed,
        config=_solver_config(args),
    )
    print(f"running {len(spec.cells())} cells x {spec.trials} trials "
          f"(threads={args.threads})", file=sys.stderr)
    result = run_success_grid(spec, threads=args.threads)
    return _emit_grid(args, result, "grid", started_at)


def cmd_stagnation(args: argparse.Namespace) -> int:
    started_at = _now()
    spec = StagnationSpec(
        n_values=tuple(args.n),
        m_values=tuple(args.m) if args.m else None,
        m_rule=args.m_rule,
        instances=args.instances,
        inits_per_instance=args.inits,
        master_seed=args.seed,
        config=_solver_config(args),
    )
    print(f"probing {len(spec.cells())} cells x {spec.instances} instances "
          f"x {spec.inits_per_instance} inits (threads={args.threads})", file=sys.stderr)
    result = probe_stagnation(spec, threads=args.threads)
    return _emit_grid(args, result, "stagnation", started_at)


def cmd_mn_curve(args: argparse.Namespace) -> int:
    started_at = _now()
    points = compute_mn_curve(
        args.n,
        (args.m_min, args.m_max),
        instances=args.instances,
        inits_per_instance=args.inits,
        threshold=args.threshold,
        seed=args.seed,
        config=_solver_config(args),
        threads=args.threads,
    )
    payload = mn_curve_to_csv(points)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload)
        _write_manifest(args.out, "mn-curve", args, [args.out], started_at)
    else:
        sys.stdout.write(payload)
    for p in points:
        where = "unbounded" if p.m_n is None else f"M_n={p.m_n} ratio={p.ratio:.4g}"
        print(f"n={p.n}: {where}", file=sys.stderr)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    started_at = _now()
    if args.lemma == "diff-phase":
        report = validate_diff_phase(args.samples, seed=args.seed)
    else:
        t_grid = args.t if args.t else None
        kwargs = {"samples_per_t": args.samples, "seed": args.seed}
        if t_grid:
            kwargs["t_grid"] = t_grid
        report = validate_min_f(**kwargs)
    payload = json.dumps(report, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload)
        _write_manifest(args.out, "validate", args, [args.out], started_at)
    else:
        sys.stdout.write(payload)
    print(f"{args.lemma}: {'PASS' if report['passed'] else 'FAIL'}", file=sys.stderr)
    return 0 if report["passed"] else 1


def _add_common(sub: argparse.ArgumentParser, threads: bool = True) -> None:
    sub.add_argument("--seed", type=int, default=_default_seed(),
                     help="master seed (default: $PRAP_SEED or 0)")
    sub.add_argument("--iters", type=int, default=None, help="iteration cap per run")
    sub.add_argument("--success-tol", type=float, default=None,
                     help="relative-error success threshold")
    if threads:
        sub.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                         help="worker pool size (results identical for any value)")


def _add_grid_axes(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--n", "--n-range", type=_parse_int_list, required=True,
                     help="n values: '16' or '8,16,32' or '4:32:4'")
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--m", type=_parse_int_list, help="explicit m values")
    group.add_argument("--m-rule", help="m from n, e.g. 'm=10*n' or '0.5n^2'")
    sub.add_argument("--out", help="output file (default: stdout)")
    sub.add_argument("--heatmap", help="also write a binary PGM heatmap here")
    sub.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prap",
        description="Phase retrieval by alternating projections: solve and experiment.",
    )
    parser.add_argument("--version", action="version", version=f"prap {prap.__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    solve = subs.add_parser("solve", help="solve one random instance")
    solve.add_argument("--n", type=int, required=True)
    solve.add_argument("--m", type=int, required=True)
    solve.add_argument("--init", choices=sorted(INIT_CHOICES), default="spectral")
    solve.add_argument("--out", help="write the trajectory JSON here")
    _add_common(solve, threads=False)
    solve.set_defaults(func=cmd_solve)

    grid = subs.add_parser("grid", help="success-probability sweep over (n, m)")
    _add_grid_axes(grid)
    grid.add_argument("--trials", type=int, default=100)
    grid.add_argument("--init", choices=sorted(INIT_CHOICES), default="spectral")
    _add_common(grid)
    grid.set_defaults(func=cmd_grid)

    stag = subs.add_parser("stagnation", help="no-stagnation-probability sweep")
    _add_grid_axes(stag)
    stag.add_argument("--instances", type=int, default=50, help="instances per cell")
    stag.add_argument("--inits", type=int, default=200, help="random starts per instance")
    _add_common(stag)
    stag.set_defaults(func=cmd_stagnation)

    curve = subs.add_parser("mn-curve", help="smallest m per n with no stagnation points")
    curve.add_argument("--n", "--n-range", type=_parse_int_list, required=True)
    curve.add_argument("--m-min", type=int, default=None,
                       help="search range lower end (default: n)")
    curve.add_argument("--m-max", type=int, required=True)
    curve.add_argument("--instances", type=int, default=50)
    curve.add_argument("--inits", type=int, default=200)
    curve.add_argument("--threshold", type=float, default=0.5)
    curve.add_argument("--out", help="output CSV (default: stdout)")
    _add_common(curve)
    curve.set_defaults(func=cmd_mn_curve)

    val = subs.add_parser("validate", help="numerical inequality validators")
    val.add_argument("--lemma", choices=("diff-phase", "min-f"), required=True)
    val.add_argument("--samples", type=int, default=10**6,
                     help="sample count (per t for min-f)")
    val.add_argument("--t", type=float, action="append",
                     help="min-f: check this t (repeatable; default grid otherwise)")
    val.add_argument("--out", help="write the JSON report here")
    _add_common(val, threads=False)
    val.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
