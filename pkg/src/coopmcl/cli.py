"""Command-line entry point.

Exit codes: 0 on success, 2 on configuration errors (bad arguments,
scenario or map files), 3 on runtime failures.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiment
from .maps import MapLoadError
from .swarm.scenario import ScenarioError, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

log = logging.getLogger("coopmcl")


def parse_tick_range(text: str) -> range:
    """Parse ``"a:b"`` (inclusive) or a single tick ``"n"``."""
    try:
        if ":" in text:
            lo, hi = text.split(":", 1)
            lo, hi = int(lo), int(hi)
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid tick range {text!r}; expected a:b") from None
    if lo < 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"invalid tick range {text!r}; need 0 <= a <= b")
    return range(lo, hi + 1)


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coopmcl", description="Cooperative Monte Carlo localization experiments.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="increase log verbosity")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario in one mode")
    run.add_argument("--scenario", required=True)
    run.add_argument("--mode", choices=[m.value for m in experiment.Mode], default="coop")
    run.add_argument("--seed", type=_seed, default=None, help="overrides the scenario seed")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--snapshots", type=parse_tick_range, default=None, metavar="A:B",
                     help="write pre/post particle snapshots for ticks A..B")

    bat = sub.add_parser("batch", help="run both modes over consecutive seeds")
    bat.add_argument("--scenario", required=True)
    bat.add_argument("--runs", type=_positive, required=True)
    bat.add_argument("--base-seed", type=_seed, default=0)
    bat.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    record = experiment.run_scenario(scenario, args.mode, args.seed, snapshot_ticks=args.snapshots)
    path = experiment.write_run(record, args.out)
    experiment.emit_particles(record, args.out)
    s = experiment.summarize(record)
    print(f"{path}: first_encounter={s.first_encounter} post_midpoint_median_error={s.post_midpoint_median_error:.3f}")
    return EXIT_OK


def _cmd_batch(args) -> int:
    summaries = experiment.batch(args.scenario, args.runs, args.base_seed, args.out)
    failed = [s.run_id for s in summaries if s.status != "ok"]
    for mode in experiment.Mode:
        m = experiment.mode_median(summaries, mode)
        print(f"{mode.value}: median post-midpoint error {experiment._fmt(m.post_midpoint_median_error)}")
    if failed:
        print(f"failed runs: {', '.join(failed)}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return _cmd_run(args) if args.command == "run" else _cmd_batch(args)
    except (ScenarioError, MapLoadError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
