"""Command-line front end.

    coopvlp validate  --scenario FILE | --plan FILE
    coopvlp crlb      --scenario FILE [--plan FILE] --out DIR
    coopvlp run       --plan FILE [--seed N] [--out DIR] [--threads N]
    coopvlp residuals --plan FILE [--seed N] [--out DIR] [--threads N]

Exit codes: 0 success, 1 invalid input, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .bounds import write_crlb_csv
from .geometry import ScenarioError, load_scenario
from .harness import (PlanError, crlb_sweep, default_sweep, load_plan, run_experiment,
                      validate_plan, validate_scenario)

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("coopvlp")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coopvlp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="verb", required=True)

    v = sub.add_parser("validate", help="check a scenario or plan file")
    v.add_argument("--scenario", type=Path)
    v.add_argument("--plan", type=Path)

    c = sub.add_parser("crlb", help="bound sweep for a scenario")
    c.add_argument("--scenario", type=Path, required=True)
    c.add_argument("--plan", type=Path, help="take sweep variable and values from this plan")
    c.add_argument("--out", type=Path, default=Path("."))

    for name, text in (("run", "full Monte Carlo experiment"),
                       ("residuals", "residual curves of the iterative solvers only")):
        r = sub.add_parser(name, help=text)
        r.add_argument("--plan", type=Path, required=True)
        r.add_argument("--seed", type=int, help="override the plan's master seed")
        r.add_argument("--out", type=Path, help="override the plan's output_dir")
        r.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    return p


def _validate(args) -> int:
    if (args.scenario is None) == (args.plan is None):
        print("validate needs exactly one of --scenario or --plan", file=sys.stderr)
        return EXIT_INVALID
    report = validate_scenario(args.scenario) if args.scenario else validate_plan(args.plan)
    print(report.text())
    return EXIT_OK if report.ok else EXIT_INVALID


def _crlb(args) -> int:
    scenario = load_scenario(args.scenario)
    variable, values = "anchor_power", default_sweep()
    if args.plan is not None:
        plan = load_plan(args.plan)
        variable, values = plan.sweep_variable, plan.sweep_values
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "crlb_sweep.csv"
    write_crlb_csv(path, crlb_sweep(scenario, variable, values))
    print(path)
    return EXIT_OK


def _run(args) -> int:
    if args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    plan = load_plan(args.plan)
    if args.seed is not None:
        plan = dataclasses.replace(plan, seed=args.seed)
    files = run_experiment(plan, args.out, threads=args.threads,
                           only_residuals=args.verb == "residuals")
    for path in files.values():
        print(path)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors are invalid input, not runtime failures
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"validate": _validate, "crlb": _crlb, "run": _run, "residuals": _run}[args.verb]
    try:
        return handler(args)
    except (ScenarioError, PlanError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - every other failure is a runtime error
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
