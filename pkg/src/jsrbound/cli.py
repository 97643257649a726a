import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional

from .config import AppConfig, load_config, save_config
from .errors import JsrError
from .loader import load_certificate, load_matrix_set
from .manager import Manager, Report
from .models import METHODS

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID_CERTIFICATE = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

_INPUT_REASONS = ("hypothesis_unmet", "capacity", "invalid")


def _setup_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="Config file (default ~/.config/jsrbound/config.json)")
    parser.add_argument("--verbose", "-v", action="count", default=0, help="-v for progress, -vv for iterations")


def _load(args: argparse.Namespace) -> AppConfig:
    cfg = load_config(args.config)
    budget_dim = getattr(args, "budget_dim", None)
    if budget_dim is not None:
        if budget_dim < 1:
            raise ValueError("--budget-dim must be positive.")
        cfg = replace(
            cfg,
            budget=replace(
                cfg.budget,
                operator_capacity=budget_dim,
                dense_capacity=min(cfg.budget.dense_capacity, budget_dim),
            ),
        )
    tol = getattr(args, "tol", None)
    if tol is not None:
        if not tol > 0:
            raise ValueError("--tol must be positive.")
        cfg = replace(
            cfg,
            tolerances=replace(cfg.tolerances, power_tol=tol),
            ellipsoid=replace(cfg.ellipsoid, tol=tol),
        )
    return cfg


def _fail(message: str) -> int:
    logger.error(message)
    print(f"error: {message}", file=sys.stderr)
    return EXIT_INPUT


def _exit_code(report: Report) -> int:
    outcomes = report.result.outcomes
    if report.requested != "all" and outcomes and outcomes[0].reason in _INPUT_REASONS:
        return EXIT_INPUT
    if report.requested != "all" and outcomes and outcomes[0].reason == "not_converged":
        return EXIT_NUMERICAL
    if report.interval is None and report.requested != "average":
        return EXIT_NUMERICAL
    return EXIT_OK


def bound_cli(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(
        prog="jsr bound",
        description="Certified lower and upper bounds on the joint spectral radius of a matrix set.",
    )
    parser.add_argument("file", type=Path, help='JSON file: {"name": ..., "matrices": [[[...]], ...]}')
    parser.add_argument("--method", default="all", choices=("all",) + METHODS, help="Method to run (default all)")
    parser.add_argument("--k", type=int, help="Kronecker power (kron) or word length (bruteforce)")
    parser.add_argument("--l", type=int, help="Number of lifted factors (lift, kron_lift)")
    parser.add_argument("--depth", type=int, help="Recursion depth (recursive)")
    parser.add_argument("--assert-cone", action="store_true", help="Assert a common invariant proper cone")
    parser.add_argument("--budget-dim", type=int, help="Largest operator dimension to build")
    parser.add_argument("--tol", type=float, help="Power iteration and ellipsoid tolerance")
    parser.add_argument("--quiet", "-q", action="store_true", help='Print only "lower upper"')
    parser.add_argument("--pdf", type=Path, help="Also write a PDF summary to this path")
    parser.add_argument("--no-timings", action="store_true", help="Leave per-method timings out of the report")
    _add_common(parser)
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)

    try:
        cfg = _load(args)
        matrix_set = load_matrix_set(args.file, cone_asserted=args.assert_cone)
        report = Manager(config=cfg).bound(matrix_set, args.method, k=args.k, l=args.l, depth=args.depth)
    except ValueError as e:
        return _fail(str(e))
    except JsrError as e:
        logger.error(f"Bounding failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL

    if args.quiet:
        interval = report.interval
        if interval is not None:
            print(f"{interval.lower!r} {interval.upper!r}")
        else:
            outcome = report.result.outcomes[0] if report.result.outcomes else None
            if outcome is not None and outcome.lower is not None:
                print(f"{outcome.lower!r} inf")
    else:
        print(report.to_json(include_timings=not args.no_timings))

    if args.pdf:
        from .pdf_report import render_pdf

        render_pdf(report, args.pdf)

    return _exit_code(report)


def plan_cli(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(
        prog="jsr plan",
        description="Cheapest method and parameter reaching accuracy 1 - epsilon.",
    )
    parser.add_argument("--m", type=int, required=True, help="Number of matrices")
    parser.add_argument("--n", type=int, required=True, help="Matrix size")
    parser.add_argument("--epsilon", type=float, required=True, help="Relative accuracy loss in (0, 1)")
    parser.add_argument("--assert-cone", action="store_true", help="Allow Kronecker methods for any sign pattern")
    parser.add_argument("--no-cone", action="store_true", help="Plan without a common invariant cone")
    parser.add_argument("--budget-dim", type=int, help="Largest operator dimension considered feasible")
    _add_common(parser)
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)

    try:
        cfg = _load(args)
        plan = Manager(config=cfg).plan(args.m, args.n, args.epsilon, cone_available=args.assert_cone or not args.no_cone)
    except ValueError as e:
        return _fail(str(e))

    print(json.dumps(plan.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def verify_cli(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(
        prog="jsr verify",
        description="Check an ellipsoid certificate (X, tau) against a matrix set.",
    )
    parser.add_argument("file", type=Path, help="Matrix set JSON file")
    parser.add_argument("--certificate", type=Path, required=True, help='JSON file: {"X": [[...]], "tau": ...}')
    _add_common(parser)
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)

    try:
        cfg = _load(args)
        matrix_set = load_matrix_set(args.file)
        cert = load_certificate(args.certificate, matrix_set.n)
        report = Manager(config=cfg).verify(matrix_set, cert)
    except ValueError as e:
        return _fail(str(e))

    out = report.to_dict()
    out["upper_bound"] = cert.tau**0.5 if report.valid else None
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK if report.valid else EXIT_INVALID_CERTIFICATE


def _parse_setting(item: str) -> tuple[str, str, Any]:
    name, sep, raw = item.partition("=")
    section, dot, key = name.strip().partition(".")
    if not sep or not dot:
        raise ValueError(f"--set expects SECTION.KEY=VALUE, got {item!r}.")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return section, key, value


def configure_cli(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(
        prog="jsr configure",
        description="Show the effective configuration, or update and save it.",
    )
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="e.g. budget.operator_capacity=500000 or ellipsoid.backend=cvxpy (repeatable)",
    )
    parser.add_argument("--reset", action="store_true", help="Start from the defaults instead of the saved file")
    _add_common(parser)
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)

    try:
        cfg = AppConfig() if args.reset else load_config(args.config)
        data = cfg.to_dict()
        for item in args.set:
            section, key, value = _parse_setting(item)
            if section not in data or key not in data[section]:
                raise ValueError(f"Unknown setting: {section}.{key}")
            data[section][key] = value
        cfg = AppConfig.from_dict(data)
        if args.set or args.reset:
            path = save_config(cfg, args.config)
            logger.info(f"Saved configuration to {path}")
    except ValueError as e:
        return _fail(str(e))

    print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    argv = argv if argv is not None else sys.argv[1:]
    if not argv or argv[0] in ("-h", "--help", "help"):
        print(
            "Usage:\n"
            "  jsr bound FILE [--method M] [--k K] [--l L] [--depth D] [--assert-cone]\n"
            "                 [--budget-dim N] [--tol T] [--quiet] [--pdf PATH]\n"
            "  jsr plan --m M --n N --epsilon EPS [--no-cone] [--budget-dim N]\n"
            "  jsr verify FILE --certificate CERT\n"
            "  jsr configure [--set SECTION.KEY=VALUE ...] [--reset]\n"
            "\n"
            f"Methods: all, {', '.join(METHODS)}\n"
            "Exit codes: 0 ok, 1 certificate rejected, 2 invalid input or unmet precondition, 3 numerical failure\n"
        )
        return EXIT_OK

    cmd = argv[0]
    rest = argv[1:]

    if cmd == "bound":
        return bound_cli(rest)
    if cmd == "plan":
        return plan_cli(rest)
    if cmd == "verify":
        return verify_cli(rest)
    if cmd == "configure":
        return configure_cli(rest)

    print(f"Unknown command: {cmd}", file=sys.stderr)
    return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
