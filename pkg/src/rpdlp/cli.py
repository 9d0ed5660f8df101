"""Command-line interface: ``rpdlp solve``, ``rpdlp bench`` and ``rpdlp theory-check``.

Every solver flag can also be set through an environment variable with the
``RPDLP_`` prefix (``RPDLP_EPS``, ``RPDLP_TIME_LIMIT``, ``RPDLP_ITERATION_LIMIT``,
``RPDLP_SCALING``, ``RPDLP_EAGER_RESTART``, ``RPDLP_JOBS``). Command-line
flags win over the environment.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .bench import format_report, run_benchmark
from .mps import read_mps, write_solution
from .scaling import SCALING_MODES
from .solver import SolverParams, SolveStatus, solve
from .theory import restarted_pdhg_standard, spectral_norm, standard_form_of

ENV_PREFIX = "RPDLP_"

EXIT_OPTIMAL = 0
EXIT_USAGE = 2  # argparse's own convention
EXIT_PRIMAL_INFEASIBLE = 3
EXIT_DUAL_INFEASIBLE = 4
EXIT_ITERATION_LIMIT = 5
EXIT_TIME_LIMIT = 6
EXIT_NUMERICAL_ERROR = 7
EXIT_IO_ERROR = 8
EXIT_CHECK_FAILED = 9

STATUS_EXIT_CODES = {
    SolveStatus.OPTIMAL: EXIT_OPTIMAL,
    SolveStatus.PRIMAL_INFEASIBLE: EXIT_PRIMAL_INFEASIBLE,
    SolveStatus.DUAL_INFEASIBLE: EXIT_DUAL_INFEASIBLE,
    SolveStatus.ITERATION_LIMIT: EXIT_ITERATION_LIMIT,
    SolveStatus.TIME_LIMIT: EXIT_TIME_LIMIT,
    SolveStatus.NUMERICAL_ERROR: EXIT_NUMERICAL_ERROR,
}


def _env(name: str, convert, default):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None or raw == "":
        return default
    try:
        return convert(raw)
    except ValueError:
        raise SystemExit(f"error: bad value {raw!r} for {ENV_PREFIX}{name}") from None


def _flag(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    defaults = SolverParams()
    p.add_argument("--eps", type=float, default=_env("EPS", float, defaults.eps_optimal),
                   help="relative optimality tolerance (default %(default)g)")
    p.add_argument("--eps-infeasible", type=float,
                   default=_env("EPS_INFEASIBLE", float, defaults.eps_infeasible))
    p.add_argument("--time-limit", type=float, default=_env("TIME_LIMIT", float, defaults.time_limit),
                   help="wall-clock limit in seconds (default %(default)g)")
    p.add_argument("--iteration-limit", type=int,
                   default=_env("ITERATION_LIMIT", int, defaults.iteration_limit))
    p.add_argument("--scaling", choices=SCALING_MODES, default=_env("SCALING", str, defaults.scaling))
    p.add_argument("--eager-restart", action="store_true",
                   default=_env("EAGER_RESTART", _flag, defaults.eager_restart),
                   help="evaluate restart criteria after every iteration")
    p.add_argument("--show-config", action="store_true",
                   help="print the resolved solver parameters as JSON and exit")


def _params(args) -> SolverParams:
    return SolverParams(
        eps_optimal=args.eps,
        eps_infeasible=args.eps_infeasible,
        time_limit=args.time_limit,
        iteration_limit=args.iteration_limit,
        scaling=args.scaling,
        eager_restart=args.eager_restart,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpdlp", description="Restarted PDHG linear programming solver.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one MPS instance")
    p.add_argument("instance", help="MPS file (fixed or free format, optionally gzipped)")
    _add_solver_flags(p)
    p.add_argument("--summary", action="store_true", help="print the termination criteria at exit")
    p.add_argument("--out", help="solution file (default: <instance name>.sol in the working directory)")
    p.add_argument("--no-vectors", action="store_true", help="omit the primal and dual vectors from the solution file")

    p = sub.add_parser("bench", help="solve every instance in a directory and report SGM10")
    p.add_argument("directory")
    _add_solver_flags(p)
    p.add_argument("--report", help="write the tab-separated report here")
    p.add_argument("--jobs", type=int, default=_env("JOBS", int, 1), help="parallel worker processes")

    p = sub.add_parser("theory-check", help="run fixed-step restarted PDHG on the standard form of an instance")
    p.add_argument("instance")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--max-iterations", type=int, default=1_000_000)
    return parser


def _solution_path(instance: str, out: str | None) -> Path:
    if out:
        return Path(out)
    name = Path(instance).name
    for suffix in (".gz", ".mps", ".MPS"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
    return Path(name + ".sol")


def cmd_solve(args) -> int:
    params = _params(args)
    try:
        lp = read_mps(args.instance)
    except OSError as exc:
        print(f"error: cannot read {args.instance}: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR
    except ValueError as exc:
        print(f"error: {args.instance}: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR
    result = solve(lp, params)
    info = result.info
    print(
        f"{lp.name or Path(args.instance).name}: {result.status.value} "
        f"objective={info.primal_objective:.12g} iterations={result.iterations} "
        f"restarts={result.restarts} seconds={result.solve_seconds:.3f}"
    )
    if args.summary:
        labels = ("gap", "primal", "dual")
        for label, (lhs, rhs) in zip(labels, info.criteria(params.eps_optimal)):
            verdict = "ok" if lhs <= rhs else "not met"
            print(f"  {label:7s} {lhs:.6e} <= {rhs:.6e}  {verdict}")
        print(
            f"  relative gap={info.relative_gap:.3e} primal={info.relative_primal_residual:.3e} "
            f"dual={info.relative_dual_residual:.3e} dual objective={info.dual_objective:.12g}"
        )
        if result.certificate is not None:
            cert = result.certificate
            print(f"  certificate from {cert.source} ray: residual={cert.residual:.3e} objective={cert.objective:.3e}")
    path = _solution_path(args.instance, args.out)
    try:
        write_solution(result, path, include_vectors=not args.no_vectors)
    except OSError as exc:
        print(f"error: cannot write {path}: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR
    return STATUS_EXIT_CODES[result.status]


def cmd_bench(args) -> int:
    params = _params(args)
    try:
        report = run_benchmark(args.directory, params, report_path=args.report, jobs=args.jobs)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR
    sys.stdout.write(format_report(report))
    return EXIT_OPTIMAL


def cmd_theory_check(args) -> int:
    try:
        lp = read_mps(args.instance)
    except (OSError, ValueError) as exc:
        print(f"error: {args.instance}: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR
    std, *_ = standard_form_of(lp)
    norm = spectral_norm(std.A)
    s = 1.0 / (2.0 * norm) if norm > 0 else 1.0
    trace = restarted_pdhg_standard(
        std, s, args.beta, max_epochs=args.epochs, max_iterations=args.max_iterations
    )
    kkt = trace.kkt_starts
    print(f"standard form {std.num_rows}x{std.num_vars}  ||A||_2={norm:.6g}  s={s:.6g}  beta={args.beta}")
    ok = trace.status == "epoch_limit"
    for n, (value, epoch) in enumerate(zip(kkt, trace.epochs)):
        bound = args.beta**n * kkt[0]
        holds = value <= bound
        ok = ok and holds
        print(f"  epoch {n:3d}  kkt={value:.6e}  bound={bound:.6e}  length={epoch.length}  {'ok' if holds else 'VIOLATED'}")
    print(f"status={trace.status} iterations={trace.iterations} max restart length={max(trace.restart_lengths, default=0)}")
    return EXIT_OPTIMAL if ok else EXIT_CHECK_FAILED


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "show_config", False):
        try:
            params = _params(args)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(json.dumps(params.as_dict(), indent=2, sort_keys=True))
        return EXIT_OPTIMAL
    commands = {"solve": cmd_solve, "bench": cmd_bench, "theory-check": cmd_theory_check}
    try:
        with np.errstate(all="ignore"):
            return commands[args.command](args)
    except ValueError as exc:  # invalid parameter combinations
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
