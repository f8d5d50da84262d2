#!/usr/bin/env python3
"""
Command line entry point: ``ness run | single | ribbon``.

Exit codes: 0 success, 1 configuration or input error, 2 realization
failure rate above threshold, 3 bound or invariant violation detected.
"""

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from experiments import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_VIOLATION,
    Experiment,
    RunConfig,
    load_run_config,
    run_experiment,
    single_system_report,
    write_outputs,
)
from ness_config import Settings, load_settings
from ness_errors import ConfigError, NessError
from utils import to_jsonable

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ness",
        description="Steady-state currents of pumped, lossy quadratic systems and their universal bounds",
    )
    parser.add_argument("--log-level", default=None,
                        help="DEBUG, INFO, WARNING or ERROR (default from NESS_LOG_LEVEL or the defaults file)")
    parser.add_argument("--defaults", default=None,
                        help="Alternative defaults file (same as NESS_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run an experiment from a JSON run config")
    run.add_argument("--config", required=True, help="Run config JSON")
    run.add_argument("--seed", type=int, default=None, help="Override the config seed")
    run.add_argument("--out", default=None, help="Output CSV (or JSON for single_system)")
    run.add_argument("--jobs", type=int, default=None, help="Worker processes")
    run.add_argument("--validate-only", action="store_true", help="Check the config and exit")

    single = sub.add_parser("single", help="Report on one system given by its matrices")
    single.add_argument("--input", required=True, help="JSON with H, A, D and optional statistics, Q0, times")
    single.add_argument("--out", default=None, help="Write the report here instead of stdout")

    ribbon = sub.add_parser("ribbon", help="Current and particle densities of a ribbon")
    ribbon.add_argument("--config", required=True, help="Ribbon spec JSON")
    ribbon.add_argument("--out", default=None, help="Per-momentum CSV; the summary goes next to it")
    return parser


def _print_json(payload) -> None:
    print(json.dumps(to_jsonable(payload), indent=2))


def cmd_run(args: argparse.Namespace, settings: Settings) -> int:
    config = load_run_config(args.config, settings.tolerances)
    config = config.with_overrides(seed=args.seed, output_path=args.out)
    if args.validate_only:
        print(f"Config OK: {config.experiment.value}, {config.n_realizations} realizations, seed {config.seed}")
        return EXIT_OK

    jobs = args.jobs or settings.jobs
    result = asyncio.run(run_experiment(config, jobs, settings.failure_rate_threshold))
    for path in write_outputs(result, Path(args.out) if args.out else None):
        print(f"Wrote {path}")
    summary = {k: v for k, v in result.summary.items() if k != "failures"}
    _print_json(summary)
    return result.exit_code


def cmd_single(args: argparse.Namespace, settings: Settings) -> int:
    payload, violations = single_system_report({"path": args.input}, settings.tolerances)
    payload["violations"] = list(violations)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(to_jsonable(payload), indent=2) + "\n", encoding="utf-8")
        print(f"Wrote {out}")
    else:
        _print_json(payload)
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_ribbon(args: argparse.Namespace, settings: Settings) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Could not read ribbon config {args.config}: {e}")
    config = RunConfig(experiment=Experiment.RIBBON, n_realizations=1, ribbon=data,
                       tolerances=settings.tolerances, output_path=args.out)
    result = asyncio.run(run_experiment(config))
    if args.out:
        for path in write_outputs(result, Path(args.out)):
            print(f"Wrote {path}")
    _print_json(result.summary)
    return result.exit_code


COMMANDS = {"run": cmd_run, "single": cmd_single, "ribbon": cmd_ribbon}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings(args.defaults)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    level = (args.log_level or settings.log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args, settings)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except NessError as e:
        print(f"Input error ({e.reason}): {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
