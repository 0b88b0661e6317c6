"""Command-line driver for the certification pipeline.

Wires together the three proof stages: the exhaustive block search, the
local curvature certificates at the conjectured minimizer, and the
positivity certification of the radial interpolation coefficients.  Every
run emits a versioned JSON report; the exit status is zero only when every
requested sub-certificate succeeds.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time

from .energy import POTENTIALS
from .hessian import CertificationError, certify_local_minimum
from .positivity import (
    case3_simple_roots,
    interpolation_residual,
    log_enclosures,
    verify_coefficient_positivity,
)
from .search import SearchParams, search

SEARCH_POTENTIALS = ("g3", "g4", "g5", "g6", "g10sharp")
HESSIAN_POTENTIALS = ("g2", "g3", "g4", "g5", "g6", "g10sharp")

# published run parameters: (scale_log2, epsilon0_log2)
DEFAULT_SEARCH_PARAMS = {
    "g3": (25, -15),
    "g4": (25, -15),
    "g5": (25, -15),
    "g6": (25, -15),
    "g10sharp": (30, -18),
}

THREADS_ENV = "TBPMIN_THREADS"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tbpmin",
        description="certification runs for the five-point energy minimum",
    )
    parser.add_argument(
        "--task",
        required=True,
        choices=("search", "hessian", "tumanov", "all"),
    )
    parser.add_argument(
        "--potential",
        default="all",
        choices=HESSIAN_POTENTIALS + ("all",),
    )
    parser.add_argument("--case", default="all", choices=("1", "2", "3", "all"))
    parser.add_argument(
        "--extended",
        action="store_true",
        help="also certify the exponent window just past the main range",
    )
    parser.add_argument("--subregion", help="block code restricting the search")
    parser.add_argument("--resume", action="store_true")
    parser.add_argument("--checkpoint", metavar="PATH")
    parser.add_argument(
        "--confirm-long",
        action="store_true",
        help="required for the full high-degree search (runs for days)",
    )
    parser.add_argument("--threads", type=int)
    parser.add_argument("--report", metavar="PATH")
    parser.add_argument(
        "--budget",
        type=int,
        default=1_000_000,
        help="node-expansion budget for the dominance prover",
    )
    parser.add_argument(
        "--max-pops",
        type=int,
        help="stop the search after this many queue pops (diagnostics)",
    )
    parser.add_argument("--scale", type=int, help="log2 of the integer grid scale")
    parser.add_argument(
        "--epsilon", type=int, help="log2 of the neighborhood in-radius"
    )
    return parser


def _thread_count(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        return int(env)
    return 1


def _search_stage(name: str, args) -> dict:
    scale, eps = DEFAULT_SEARCH_PARAMS[name]
    params = SearchParams(
        POTENTIALS[name],
        scale_log2=args.scale if args.scale is not None else scale,
        epsilon0_log2=args.epsilon if args.epsilon is not None else eps,
        thread_count=_thread_count(args),
        checkpoint_path=args.checkpoint,
        subregion=args.subregion,
    )
    report = search(params, resume=args.resume, max_pops=args.max_pops)
    payload = report.to_json_dict(params)
    payload["stage"] = f"search:{name}"
    payload["success"] = report.status == "success"
    return payload


def _hessian_stage(name: str, args) -> dict:
    epsilon0 = None
    if args.epsilon is not None:
        from fractions import Fraction

        epsilon0 = Fraction(1, 1 << -args.epsilon)
    try:
        certificate = certify_local_minimum(POTENTIALS[name], epsilon0)
        payload = certificate.to_json_dict()
        payload["success"] = True
    except CertificationError as exc:
        payload = {"task": "hessian", "potential": name, "success": False,
                   "error": str(exc)}
    payload["stage"] = f"hessian:{name}"
    return payload


def _tumanov_case_stage(case: int, args) -> dict:
    residual = float(
        max(
            interpolation_residual(case, s)
            for s in _oracle_exponents(case)
        )
    )
    try:
        report = verify_coefficient_positivity(
            case, extended=args.extended and case == 3
        )
        payload = report.to_json_dict()
        payload["success"] = bool(report.certified and residual < 1e-8)
    except CertificationError as exc:
        payload = {"case": case, "success": False, "error": str(exc)}
    payload["interpolation_residual"] = residual
    payload["stage"] = f"tumanov:case{case}"
    return payload


def _oracle_exponents(case: int):
    lo, hi = {1: (-2, 0), 2: (0, 6), 3: (6, 13)}[case]
    steps = 20
    pad = (hi - lo) / (steps + 1)
    return [lo + pad * (i + 1) for i in range(steps)]


def _log_bracket_stage() -> dict:
    try:
        brackets = log_enclosures()
        payload = {
            "widths": {str(m): str(iv.width) for m, iv in brackets.items()},
            "success": True,
        }
    except CertificationError as exc:
        payload = {"success": False, "error": str(exc)}
    payload["stage"] = "log-brackets"
    return payload


def _simple_root_stage(args) -> dict:
    report = case3_simple_roots(budget=args.budget)
    payload = report.to_json_dict()
    payload["success"] = report.certified
    payload["stage"] = "tumanov:simple-roots"
    return payload


def _tumanov_stages(args) -> list:
    cases = (1, 2, 3) if args.case == "all" else (int(args.case),)
    if args.extended and 3 not in cases:
        raise SystemExit("--extended applies to case 3 only")
    stages = [_log_bracket_stage()]
    for case in cases:
        stages.append(_tumanov_case_stage(case, args))
    if 3 in cases:
        stages.append(_simple_root_stage(args))
    return stages


def _require_long_confirmation(args, potentials) -> None:
    if args.subregion is not None or args.confirm_long:
        return
    if "g10sharp" in potentials and args.max_pops is None:
        raise SystemExit(
            "the full high-degree search takes days; pass --confirm-long "
            "(or restrict with --subregion / --max-pops)"
        )


def _selected(args, allowed) -> tuple:
    if args.potential == "all":
        return allowed
    if args.potential not in allowed:
        raise SystemExit(
            f"potential {args.potential} not available for this task"
        )
    return (args.potential,)


def _write_report(path: str, payload: dict) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            json.dump(payload, handle, indent=1, sort_keys=True)
            handle.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    started = time.time()
    stages = []

    if args.task in ("search", "all"):
        potentials = _selected(args, SEARCH_POTENTIALS)
        if args.subregion is not None and len(potentials) != 1:
            raise SystemExit("--subregion needs a single --potential")
        _require_long_confirmation(args, potentials)
        for name in potentials:
            stages.append(_search_stage(name, args))

    if args.task in ("hessian", "all"):
        for name in _selected(args, HESSIAN_POTENTIALS):
            stages.append(_hessian_stage(name, args))

    if args.task == "tumanov" or (args.task == "all" and args.potential == "all"):
        stages.extend(_tumanov_stages(args))

    success = all(stage["success"] for stage in stages)
    report = {
        "schema": 1,
        "task": args.task,
        "success": success,
        "wall_seconds": time.time() - started,
        "stages": stages,
    }
    if args.report:
        _write_report(args.report, report)

    for stage in stages:
        marker = "ok" if stage["success"] else "FAILED"
        print(f"{stage['stage']}: {marker}")
    if not success:
        failing = ", ".join(s["stage"] for s in stages if not s["success"])
        print(f"certification failed at: {failing}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
