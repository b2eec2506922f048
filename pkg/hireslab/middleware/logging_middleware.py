"""
Command logging middleware.
"""
import argparse
import logging
import time
import uuid
from typing import Callable

from hireslab.config import settings
from hireslab.utils.metrics import metrics_collector

logger = logging.getLogger(__name__)

CommandHandler = Callable[[argparse.Namespace], int]


class CommandLoggingMiddleware:
    """Wraps CLI command handlers to log every run and record its duration."""

    def __init__(self, handler: CommandHandler):
        self.handler = handler

    def __call__(self, args: argparse.Namespace) -> int:
        """
        Log start, completion or failure of one command run.

        Args:
            args: Parsed command-line namespace (``args.command`` names the command)

        Returns:
            The handler's exit code
        """
        run_id = str(uuid.uuid4())
        args.run_id = run_id
        command = getattr(args, "command", "unknown")
        start_time = time.time()

        logger.info(f"Command started | ID: {run_id} | Command: {command}")

        try:
            exit_code = self.handler(args)
            duration = time.time() - start_time
            metrics_collector.record_stage(f"command.{command}", duration, failed=exit_code != 0)
            logger.info(
                f"Command completed | "
                f"ID: {run_id} | "
                f"Exit: {exit_code} | "
                f"Duration: {duration:.3f}s"
            )
            return exit_code

        except Exception as e:
            duration = time.time() - start_time
            metrics_collector.record_stage(f"command.{command}", duration, failed=True)
            logger.error(
                f"Command failed | "
                f"ID: {run_id} | "
                f"Error: {str(e)} | "
                f"Duration: {duration:.3f}s",
                exc_info=settings.debug,
            )
            raise
