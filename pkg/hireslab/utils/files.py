"""
Atomic file writes: content goes to a temporary sibling, then os.replace.
"""
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Union

PathLike = Union[str, Path]


def atomic_write_bytes(path: PathLike, payload: bytes) -> Path:
    """
    Write bytes so readers never observe a partially written file.

    Args:
        path: Destination file (parent directories are created)
        payload: Bytes to write

    Returns:
        The destination path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def atomic_write_text(path: PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def dumps_json(obj: Any, pretty: bool = False) -> str:
    """Stable-key-ordered JSON text."""
    if pretty:
        return json.dumps(obj, sort_keys=True, indent=2)
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def atomic_write_json(path: PathLike, obj: Any, pretty: bool = True) -> Path:
    return atomic_write_text(path, dumps_json(obj, pretty=pretty) + "\n")
