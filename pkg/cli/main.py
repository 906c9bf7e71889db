"""
Argument parsing and command dispatch.
"""
import argparse
import logging
import sys
from typing import List, Optional

from cli.commands import COMMANDS, command_map
from core.config import load_config

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbose: bool = False):
    """Configure the root logger once per invocation."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format=LOG_FORMAT, force=True)


def _global_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None,
                        help="run config JSON (default: built-in synthetic fixture)")
    common.add_argument("--seed", type=int, default=None,
                        help="base seed; stage seeds derive from it (default: config seed)")
    common.add_argument("--out", default=None,
                        help="output directory (default: config output.directory)")
    common.add_argument("--strict", action="store_true",
                        help="fail on dataset validation issues instead of reporting them")
    common.add_argument("--verbose", action="store_true", help="debug logging")
    return common


def build_parser() -> argparse.ArgumentParser:
    """Parser with one subcommand per pipeline stage."""
    parser = argparse.ArgumentParser(
        prog="yieldcast",
        description="Crop-yield prediction pipeline: CNN/LSTM networks, GEM ensemble, analysis.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    common = _global_flags()
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    for command in COMMANDS:
        sub = subparsers.add_parser(
            command.name, help=command.help, description=command.help, parents=[common],
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
        command.add_arguments(sub)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and run one command.

    Returns:
        Exit status: 0 on success, 1 on a pipeline error
        (argparse exits with 2 on usage errors)
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    command = command_map()[args.command]
    try:
        config = load_config(args.config).with_overrides(args.seed, args.out, args.strict)
        summary = command.execute(args, config)
    except (ValueError, IOError, RuntimeError) as e:
        logger.error("%s failed: %s", args.command, e)
        print(f"[ERROR] {args.command}: {e}", file=sys.stderr)
        return 1
    print(summary)
    return 0
