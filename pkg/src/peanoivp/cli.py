"""Command-line front end.

Exit codes: 0 success, 1 the computed answer is negative (a certificate or
check says no), 2 usage error, 3 numerical failure (box exit, bound
violation, bisection failure, evaluation error).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bounds, corpus, extremal, integrators
from .errors import NumericalFailure, PeanoError, UsageError
from .gridfn import GridFunction
from .problem import IvpProblem
from .residual import is_solution, residual_functional

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(text: str, path: str | None, out) -> None:
    if path:
        Path(path).write_text(text)
    else:
        out.write(text)


def _emit_report(report: dict, args, out) -> None:
    _emit(json.dumps(_clean(report), indent=2) + "\n", args.report, out)


def _load_problem(args) -> IvpProblem:
    source = args.problem
    if source in corpus.names():
        p = corpus.get(source).problem
    elif Path(source).is_file():
        p = IvpProblem.load(source)
    else:
        raise UsageError(
            f"[cli] --problem {source!r} is neither a corpus name ({', '.join(corpus.names())}) nor a file"
        )
    if args.L is not None:
        p = IvpProblem(t0=p.t0, y0=p.y0, a=p.a, b=p.b, rhs=p.rhs, L=args.L, label=p.label)
    return p


def _problem_info(p: IvpProblem) -> dict:
    box = p.domain
    return {
        "label": p.label,
        "rhs": p.rhs_sources(),
        "t0": p.t0,
        "y0": list(p.y0),
        "a": p.a,
        "b": p.b,
        "L": box.L,
        "L_estimated": box.L_estimated,
        "c": box.c,
    }


def _positive_int(name: str, value: int, minimum: int = 1) -> int:
    if value < minimum:
        raise UsageError(f"[cli] --{name} must be >= {minimum}, got {value}")
    return value


def _positive_float(name: str, value: float) -> float:
    if not (math.isfinite(value) and value > 0):
        raise UsageError(f"[cli] --{name} must be finite and > 0, got {value}")
    return value


# subcommands ---------------------------------------------------------------


def cmd_solve(args, out) -> int:
    p = _load_problem(args)
    if args.method == "tonelli":
        k = _positive_int("k", args.k, 2)
        m = args.grid if args.grid is not None else 100 * k
        integrators.TonelliParams(k, m)
    else:
        k = None
        m = _positive_int("grid", args.grid if args.grid is not None else 1000, 2)
    g, cert, report = integrators.solve(p, args.method, k=k, m=m)
    _emit(g.to_csv(), args.out, out)
    payload = {"problem": _problem_info(p), **cert.to_dict()}
    if args.verbose:
        payload["node_residuals"] = [float(r) for r in report.node_residuals]
    _emit_report(payload, args, out)
    return EXIT_OK if cert.holds else EXIT_NEGATIVE


def cmd_residual(args, out) -> int:
    p = _load_problem(args)
    g = GridFunction.from_csv(args.trajectory)
    report = residual_functional(p, g)
    payload = {"problem": _problem_info(p), "m": g.m, **report.to_dict(verbose=args.verbose)}
    status = EXIT_OK
    if args.tol is not None:
        verdict = is_solution(p, g, args.tol, report)
        payload["tol"] = args.tol
        payload["is_solution"] = verdict
        status = EXIT_OK if verdict else EXIT_NEGATIVE
    _emit_report(payload, args, out)
    return status


def cmd_extremal(args, out) -> int:
    p = _load_problem(args)
    schedule = extremal.schedule_up_to(args.kmax, args.kmin)
    _positive_int("grid", args.grid, 2)
    _positive_float("tol", args.tol)
    fn = extremal.greatest_solution if args.side == "greatest" else extremal.least_solution
    result = fn(p, schedule, args.grid, args.tol)
    _emit(result.approx.to_csv(), args.out, out)
    _emit_report({"problem": _problem_info(p), **result.to_dict(verbose=args.verbose)}, args, out)
    # not a certificate: convergence is reported, not turned into a verdict
    return EXIT_OK


def cmd_verify(args, out) -> int:
    p = _load_problem(args)
    g = GridFunction.from_csv(args.candidate)
    cert = bounds.verify(p, g, args.kind, args.strict, delta_strict=args.delta_strict, slack=args.slack)
    _emit_report({"problem": _problem_info(p), **cert.to_dict()}, args, out)
    return EXIT_OK if cert.verdict else EXIT_NEGATIVE


def cmd_bracket(args, out) -> int:
    p = _load_problem(args)
    _positive_float("eps", args.eps)
    alpha = GridFunction.from_csv(args.lower)
    beta = GridFunction.from_csv(args.upper)
    result = bounds.goodman_chain(p, alpha, beta, args.eps)
    report = residual_functional(p, result.chain)
    chain = result.chain.component(0)
    inside = bool(
        np.all(chain >= alpha.component(0) - 1e-9) and np.all(chain <= beta.component(0) + 1e-9)
    )
    holds = report.value < args.eps + result.tol_chain
    _emit(result.chain.to_csv(), args.out, out)
    payload = {
        "problem": _problem_info(p),
        "eps": args.eps,
        "m": result.chain.m,
        "L_chain": result.L,
        "steps_per_segment": result.steps_per_segment,
        "segments": len(result.partition) - 1,
        "max_abs_G": result.max_abs_G,
        "tol_chain": result.tol_chain,
        "residual": report.value,
        "argmax_t": report.argmax_t,
        "quadrature_slack": report.quadrature_slack,
        "between_bounds": inside,
        "holds": bool(holds and inside),
    }
    if args.verbose:
        payload["partition"] = list(result.partition)
    _emit_report(payload, args, out)
    return EXIT_OK if holds and inside else EXIT_NEGATIVE


def cmd_quasimono(args, out) -> int:
    p = _load_problem(args)
    _positive_int("samples", args.samples)
    report = bounds.check_quasimonotone(p, args.samples, args.seed)
    _emit_report({"problem": _problem_info(p), **report.to_dict()}, args, out)
    return EXIT_OK if report.verdict else EXIT_NEGATIVE


def cmd_corpus(args, out) -> int:
    if args.dump:
        entry = corpus.get(args.dump)
        _emit(entry.problem.to_json() + "\n", args.out, out)
        return EXIT_OK
    lines = []
    for name in corpus.names():
        entry = corpus.get(name)
        lines.append(f"{name}\t{'; '.join(entry.problem.rhs_sources())}\t{entry.notes}")
    _emit("\n".join(lines) + "\n", args.out, out)
    return EXIT_OK


# parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peanoivp",
        description="Certified approximate and extremal solutions of initial value problems y' = f(t, y).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", required=True, help="corpus name or path to a problem JSON file")
    common.add_argument("--L", type=float, default=None, help="override the bound on |f| over the box")
    common.add_argument("--report", default=None, help="write the JSON report here (default: stdout)")
    common.add_argument("--seed", type=int, default=0, help="seed for sampling (default 0)")
    common.add_argument("--verbose", action="store_true", help="include per-node arrays in reports")

    traj = argparse.ArgumentParser(add_help=False)
    traj.add_argument("--out", default=None, help="write the trajectory CSV here (default: stdout)")

    s = sub.add_parser("solve", parents=[common, traj], help="Tonelli or Euler approximate solution")
    s.add_argument("--method", choices=("tonelli", "euler"), default="tonelli")
    s.add_argument("--k", type=int, default=16, help="Tonelli delay divisor (default 16)")
    s.add_argument("--grid", type=int, default=None,
                   help="number of grid cells m (default 100*k for tonelli, 1000 for euler)")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("residual", parents=[common], help="residual functional of a trajectory")
    s.add_argument("--trajectory", required=True, help="trajectory CSV (t,y1,...,yn)")
    s.add_argument("--tol", type=float, default=None, help="also decide whether it is a solution")
    s.set_defaults(func=cmd_residual)

    s = sub.add_parser("extremal", parents=[common, traj], help="least or greatest solution (scalar)")
    s.add_argument("--side", choices=("least", "greatest"), required=True)
    s.add_argument("--kmin", type=int, default=4, help="first perturbation divisor (default 4)")
    s.add_argument("--kmax", type=int, default=256, help="last perturbation divisor (default 256)")
    s.add_argument("--grid", type=int, default=4096, help="grid cells m shared by all rungs (default 4096)")
    s.add_argument("--tol", type=float, default=1e-3, help="stop when consecutive rungs are this close")
    s.set_defaults(func=cmd_extremal)

    s = sub.add_parser("verify", parents=[common], help="certify a lower or upper solution (scalar)")
    s.add_argument("--candidate", required=True, help="candidate trajectory CSV")
    s.add_argument("--kind", choices=("lower", "upper"), required=True)
    s.add_argument("--strict", action="store_true")
    s.add_argument("--delta-strict", type=float, default=bounds.DELTA_STRICT,
                   help="margin required for strictness (default 1e-9)")
    s.add_argument("--slack", type=float, default=0.0, help="tolerated negative margin (non-strict)")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("bracket", parents=[common, traj],
                       help="approximate solution between ordered lower/upper solutions (scalar)")
    s.add_argument("--lower", required=True, help="lower solution CSV")
    s.add_argument("--upper", required=True, help="upper solution CSV")
    s.add_argument("--eps", type=float, required=True, help="target residual")
    s.set_defaults(func=cmd_bracket)

    s = sub.add_parser("quasimono", parents=[common], help="sample for quasimonotonicity violations")
    s.add_argument("--samples", type=int, default=10_000)
    s.set_defaults(func=cmd_quasimono)

    s = sub.add_parser("corpus", help="list or dump built-in problems")
    group = s.add_mutually_exclusive_group(required=True)
    group.add_argument("--list", action="store_true")
    group.add_argument("--dump", metavar="NAME")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_corpus)
    return parser


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args, out)
    except UsageError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE
    except NumericalFailure as exc:
        err.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except PeanoError as exc:  # pragma: no cover - every subclass is one of the two above
        err.write(f"error: {exc}\n")
        return EXIT_NUMERICAL
    except OSError as exc:
        err.write(f"error: [cli] {exc}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
