# main.py

import argparse
import logging
import sys

from ramdp import commands, log_utils
from ramdp.environments import ENVIRONMENT_KEYS

logger = logging.getLogger('Ramdp')


class _Parser(argparse.ArgumentParser):
    """argparse with the usage exit code of the CLI."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(commands.EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(value):
    try:
        parsed = int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("must be a positive integer") from exc
    if parsed < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return parsed


def _non_negative_int(value):
    try:
        parsed = int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("must be a non-negative integer") from exc
    if parsed < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return parsed


def _positive_float(value):
    try:
        parsed = float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("must be a positive number") from exc
    if parsed <= 0:
        raise argparse.ArgumentTypeError("must be a positive number")
    return parsed


def build_parser():
    parser = _Parser(description="Robust anytime learning of MDPs through interval MDPs")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run an experiment config and write CSV results")
    run.add_argument("--config", required=True, help="Experiment config (JSON)")
    run.add_argument("--out", help="Output directory (default: paths.results_dir)")
    run.add_argument("--seed", type=_non_negative_int, help="Override the config's base seed")
    run.add_argument("--workers", type=_positive_int, help="Parallel worker processes")
    run.add_argument("--db", help="Also store the records in this sqlite database")
    run.add_argument("--timing", action="store_true", help="Record wall-clock time per iteration")

    solve = subparsers.add_parser("solve", help="Solve an MDP or interval MDP file")
    solve.add_argument("model", help="Model file in the text format")
    solve.add_argument("--spec", default="Pmax", help="Pmax, Pmin, Rmax or Rmin")
    solve.add_argument("--targets", nargs="+", required=True, help="Target state labels")
    solve.add_argument("--avoid", nargs="+", default=[], help="Avoid state labels (reach-avoid)")
    solve.add_argument("--semantics", choices=["optimistic", "pessimistic"],
                       help="Interval semantics for uMDP files (default: pessimistic)")
    solve.add_argument("--tolerance", type=_positive_float, help="Convergence tolerance")
    solve.add_argument("--policy", help="Write the optimal policy to this file")

    subparsers.add_parser("list-envs", help="List the benchmark environments")

    export = subparsers.add_parser("export-env", help="Write an environment in the text format")
    export.add_argument("env", choices=ENVIRONMENT_KEYS)
    export.add_argument("--out", required=True, help="Output model file")

    summarize = subparsers.add_parser("summarize", help="Re-aggregate a run stored in sqlite")
    summarize.add_argument("--db", required=True, help="sqlite results database")
    summarize.add_argument("--run-id", type=_positive_int, required=True)
    summarize.add_argument("--out", help="Output directory (default: paths.results_dir)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    log_utils.configure_logging(level=logging.DEBUG if args.verbose else None)

    try:
        if args.command == "run":
            return commands.cmd_run(args.config, args.out, args.seed, args.workers, args.db, args.timing)
        if args.command == "solve":
            return commands.cmd_solve(
                args.model, args.spec, args.targets, args.avoid, args.semantics,
                args.tolerance, args.policy,
            )
        if args.command == "list-envs":
            return commands.cmd_list_envs()
        if args.command == "export-env":
            return commands.cmd_export_env(args.env, args.out)
        return commands.cmd_summarize(args.db, args.run_id, args.out)
    except KeyboardInterrupt:
        logger.info("Stopped by user.")
        return commands.EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
