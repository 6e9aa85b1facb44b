# app/runner/app.py
"""Command-line front door: ``fold-maps <subcommand> [options]``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from dotenv import load_dotenv

from app.runner.workflow import DEMOS, load_demo, run_scenario
from app.src.errors import ConfigError, FoldError
from app.src.scenario_config import apply_overrides, load_config

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_REPORT_FAILURE, EXIT_USAGE = 0, 1, 2

# ---------------------------
# Parser
# ---------------------------

def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=Path, help="output directory (default: $FOLDS_OUT_DIR/<name>)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--nt", type=int, help="number of fiber samples")
    parser.add_argument("--t-min", dest="t_min", type=float)
    parser.add_argument("--t-max", dest="t_max", type=float)
    parser.add_argument("--tol", type=float, help="solve tolerance")
    parser.add_argument("--jobs", type=int, help="worker threads (default: $FOLDS_JOBS or 1)")
    parser.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fold-maps", description="Fibers, folds and preimage counts of F = L - P.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("spectrum", "certify the spectral triple; writes triple.json"),
        ("fiber", "trace the anchor fiber; writes fiber.csv"),
        ("solve", "solve F(u) = g for the configured targets; writes solve.json"),
        ("classify", "classify the map from its anchor fiber; writes classify.json"),
        ("verify", "sampled hypothesis checks and oracles; writes verify.json"),
    ):
        command = sub.add_parser(name, help=text)
        command.add_argument("--config", type=Path, required=True, help="scenario file (.toml or .json)")
        _add_run_options(command)
    demo = sub.add_parser("demo", help="run a built-in scenario end to end")
    demo.add_argument("name", choices=DEMOS)
    demo.add_argument("--config", type=Path, help="use this file instead of the built-in scenario")
    _add_run_options(demo)
    return parser


def _configure_logging(level: Optional[str]) -> None:
    level = (level or os.getenv("FOLDS_LOG_LEVEL") or "INFO").upper()
    root = logging.getLogger()
    if not root.handlers:
        logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    else:
        root.setLevel(level)


# ---------------------------
# Entry points
# ---------------------------

def run(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    _configure_logging(args.log_level)

    name = getattr(args, "name", None) or (args.config.stem if args.config else "scenario")
    try:
        if args.command == "demo" and args.config is None:
            config = load_demo(args.name)
        else:
            config = load_config(args.config)
        config = apply_overrides(
            config, output=args.out, seed=args.seed, nt=args.nt, t_min=args.t_min, t_max=args.t_max, tol=args.tol
        )
        jobs = args.jobs if args.jobs is not None else int(os.getenv("FOLDS_JOBS", "1"))
        ok = run_scenario(config, args.command, jobs=jobs)
    except ConfigError as e:
        logger.error("Config error: %s", e)
        return EXIT_USAGE
    except FoldError as e:
        logger.error("Scenario %s failed: %s: %s", name, type(e).__name__, e)
        return EXIT_REPORT_FAILURE
    except ValueError as e:
        logger.error("Invalid input for scenario %s: %s", name, e)
        return EXIT_USAGE
    return EXIT_OK if ok else EXIT_REPORT_FAILURE


def main() -> None:
    load_dotenv(override=True)
    sys.exit(run())


if __name__ == "__main__":
    main()
