"""
CLI command groups.

Each module registers its subcommands on the shared subparser set and binds
a handler ``(args) -> exit code`` through ``set_defaults(handler=...)``.
"""
import argparse
import sys
from typing import Any, Optional, Sequence, Tuple

from hireslab.config import settings
from hireslab.utils.files import dumps_json


def emit(args: argparse.Namespace, payload: Any, table: Optional[Sequence[Sequence[Any]]] = None) -> None:
    """
    Write a command result to stdout.

    JSON (stable key order) by default; with ``--pretty`` the optional
    table rows are printed as aligned columns, otherwise indented JSON.
    """
    pretty = getattr(args, "pretty", False)
    if pretty and table:
        widths = [max(len(str(row[k])) for row in table) for k in range(len(table[0]))]
        for row in table:
            print("  ".join(str(cell).ljust(width) for cell, width in zip(row, widths)).rstrip())
        return
    print(dumps_json(payload, pretty=pretty))
    sys.stdout.flush()


def parse_grid(text: str) -> Tuple[int, int]:
    """'m,n' -> (m, n) for argparse."""
    try:
        m, n = (int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 'm,n', got {text!r}")
    if m < 1 or n < 1:
        raise argparse.ArgumentTypeError(f"grid dimensions must be positive, got {text!r}")
    return m, n


def resolve_seed(args: argparse.Namespace) -> int:
    """--seed when given, else HIRES_SEED."""
    seed = getattr(args, "seed", None)
    return settings.default_seed if seed is None else seed
