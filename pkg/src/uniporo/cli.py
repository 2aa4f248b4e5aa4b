"""Command line entry point: ``uniporo <experiment> [--config FILE] [--set key=value ...]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import parse_config
from .errors import ConfigError, UniporoError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3

COMMANDS = {
    "converge-time": "converge_time",
    "converge-space": "converge_space",
    "iterate": "iterate",
    "barry-mercer": "barry_mercer",
    "run": "single_run",
}

HELP = {
    "converge-time": "temporal convergence ladder on the manufactured solution",
    "converge-space": "spatial convergence ladder on the manufactured solution",
    "iterate": "decoupled iteration against the monolithic solution, per-iteration errors",
    "barry-mercer": "point-source benchmark, cross-sections and VTK snapshots",
    "run": "single run of the configured problem",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="uniporo", description="Four-field poroelasticity experiments.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", type=Path, help="configuration file (key = value lines)")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key; repeatable")
        p.add_argument("--output", help="output directory (overrides the config)")
        p.add_argument("--check", action="store_true",
                       help="exit with status 3 when the experiment's acceptance checks fail")
        p.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        text = args.config.read_text() if args.config else ""
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    overrides = list(args.overrides) + ([f"output={args.output}"] if args.output else [])
    try:
        cfg = parse_config(text, experiment=COMMANDS[args.command], overrides=overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        sys.stdout.write(cfg.to_text())
        return EXIT_OK

    from .experiments import run_experiment

    try:
        res = run_experiment(cfg)
    except (UniporoError, OSError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for path in res.files:
        print(path)
    for name, (ok, detail) in res.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    if args.check and not res.passed:
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
