"""Command-line entry point.

Subcommands map one-to-one onto the study kinds; every subcommand takes
--config PATH plus overrides for the master seed, worker count, and
output directory. Exit status: 0 all checks passed, 1 a statistical check
failed beyond tolerance, 2 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .concentration import DeltaThresholdError
from .experiments import (
    STUDIES,
    ConfigurationError,
    ExperimentConfig,
    load_config,
    run_study,
)
from .grids import GridAlignmentError, GridMismatchError

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chaoslab",
        description="Mean-field particle Monte Carlo studies and inequality checks",
    )
    parser.add_argument("--version", action="version", version=f"chaoslab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STUDIES:
        p = sub.add_parser(name, help=f"run the {name} study")
        p.add_argument("--config", required=False, help="YAML config file")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--workers", type=int, default=None, help="worker count override")
        p.add_argument("--out", default=None, help="output directory override")
    return parser


def _resolve_config(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig.from_mapping({})
    if cfg.study != args.command and args.config:
        # the subcommand wins; the config's study field is advisory
        from dataclasses import replace

        cfg = replace(cfg, study=args.command)
    else:
        from dataclasses import replace

        cfg = replace(cfg, study=args.command)
    return cfg.with_overrides(seed=args.seed, workers=args.workers, out=args.out)


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        result = run_study(cfg)
    except (ConfigurationError, DeltaThresholdError, GridAlignmentError,
            GridMismatchError, FileNotFoundError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    status = "PASS" if result.all_passed else "FAIL"
    print(f"[{status}] study={result.study} files={[str(f) for f in result.files]}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
