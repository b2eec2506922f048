"""
Main command-line entry point.
"""
import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from hireslab import __version__
from hireslab.commands import bench, model, slicing, toy
from hireslab.config import settings
from hireslab.middleware.logging_middleware import CommandLoggingMiddleware
from hireslab.utils.errors import HiresError
from hireslab.utils.files import dumps_json
from hireslab.utils.metrics import metrics_collector

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(level: Optional[str] = None) -> None:
    """Log to stderr; stdout carries command results only."""
    if settings.debug:
        resolved = logging.DEBUG
    else:
        resolved = getattr(logging, (level or settings.log_level).upper(), logging.INFO)
    logging.basicConfig(level=resolved, format=LOG_FORMAT, stream=sys.stderr, force=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hireslab",
        description="High-resolution image slicing, encoding and position-robustness benchmarking.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--pretty", action="store_true", help="Human-readable output instead of compact JSON")
    parser.add_argument("--threads", type=int, help="Worker cap (default HIRES_THREADS)")
    parser.add_argument("--metrics", action="store_true", help="Print stage timings to stderr afterwards")
    parser.add_argument("--log-level", help="Override LOG_LEVEL")

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    for group in (slicing, model, bench, toy):
        group.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 1 on a failed operation, 2 on a usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    configure_logging(args.log_level)
    if args.threads is not None and args.threads < 1:
        parser.print_usage(sys.stderr)
        print(f"hireslab: error: --threads must be positive, got {args.threads}", file=sys.stderr)
        return 2

    handler = CommandLoggingMiddleware(args.handler)
    try:
        exit_code = handler(args)
    except (HiresError, ValueError, OSError, ValidationError) as e:
        print(f"hireslab {args.command}: error: {e}", file=sys.stderr)
        exit_code = 1
    finally:
        if args.metrics:
            print(dumps_json(metrics_collector.get_metrics(), pretty=True), file=sys.stderr)
    return exit_code


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
