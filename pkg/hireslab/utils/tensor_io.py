"""
TNSR1 tensor file format and weight manifest directories.

Layout of a TNSR1 file:
    magic b"TNSR" | version u8 = 1 | dtype u8 (0 = float32, 1 = float64) |
    rank u8 | reserved u8 = 0 | rank x u32 LE extents | row-major LE payload
"""
import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np

from hireslab.numerics.tensor import Tensor
from hireslab.utils.errors import TensorFormatError
from hireslab.utils.files import PathLike, atomic_write_bytes, atomic_write_json

logger = logging.getLogger(__name__)

MAGIC = b"TNSR"
VERSION = 1
HEADER = struct.Struct("<4sBBBB")
DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
CODE_FOR_DTYPE = {np.dtype("float32"): 0, np.dtype("float64"): 1}
MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "TNSR1-manifest"


def encode_tensor(array: Union[np.ndarray, Tensor]) -> bytes:
    """Serialize a float32/float64 array to TNSR1 bytes."""
    data = array.data if isinstance(array, Tensor) else np.asarray(array)
    code = CODE_FOR_DTYPE.get(np.dtype(data.dtype.name))
    if code is None:
        raise TensorFormatError(f"TNSR1 stores float32/float64 only, got {data.dtype}")
    if data.ndim > 255:
        raise TensorFormatError(f"rank {data.ndim} exceeds TNSR1 limit")
    header = HEADER.pack(MAGIC, VERSION, code, data.ndim, 0)
    extents = struct.pack(f"<{data.ndim}I", *data.shape)
    payload = np.ascontiguousarray(data, dtype=DTYPE_CODES[code]).tobytes(order="C")
    return header + extents + payload


def decode_tensor(payload: bytes) -> np.ndarray:
    """
    Parse TNSR1 bytes.

    Raises:
        TensorFormatError: On bad magic, version, dtype, reserved byte or payload size
    """
    if len(payload) < HEADER.size:
        raise TensorFormatError("TNSR1 payload shorter than header")
    magic, version, code, rank, reserved = HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise TensorFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise TensorFormatError(f"unsupported TNSR version {version}")
    if code not in DTYPE_CODES:
        raise TensorFormatError(f"unknown dtype code {code}")
    if reserved != 0:
        raise TensorFormatError("reserved header byte must be 0")
    offset = HEADER.size
    if len(payload) < offset + 4 * rank:
        raise TensorFormatError("truncated TNSR1 extents")
    shape = struct.unpack_from(f"<{rank}I", payload, offset)
    offset += 4 * rank
    dtype = DTYPE_CODES[code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    body = payload[offset:]
    if len(body) != expected:
        raise TensorFormatError(f"payload has {len(body)} bytes, expected {expected}")
    return np.frombuffer(body, dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))


def write_tensor(path: PathLike, array: Union[np.ndarray, Tensor]) -> Path:
    return atomic_write_bytes(path, encode_tensor(array))


def read_tensor(path: PathLike) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())


def _file_name(name: str) -> str:
    return name.replace("/", "_") + ".tnsr"


def save_weight_manifest(
    directory: PathLike,
    tensors: Mapping[str, Union[np.ndarray, Tensor]],
    metadata: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Write every tensor as a TNSR1 file plus a JSON manifest naming them.

    The manifest is written last so a directory with a manifest is complete.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = {}
    for name, value in tensors.items():
        data = value.data if isinstance(value, Tensor) else np.asarray(value)
        file_name = _file_name(name)
        write_tensor(directory / file_name, data)
        entries[name] = {"file": file_name, "shape": list(data.shape), "dtype": data.dtype.name}
    manifest = {"format": MANIFEST_FORMAT, "tensors": entries, "metadata": metadata or {}}
    path = atomic_write_json(directory / MANIFEST_NAME, manifest)
    logger.info(f"Weights saved | Dir: {directory} | Tensors: {len(entries)}")
    return path


def load_weight_manifest(directory: PathLike) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """
    Read a manifest directory.

    Returns:
        (name -> array, metadata dict)
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.exists():
        raise TensorFormatError(f"no {MANIFEST_NAME} in {directory}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != MANIFEST_FORMAT:
        raise TensorFormatError(f"unexpected manifest format {manifest.get('format')!r}")
    arrays = {}
    for name, entry in manifest["tensors"].items():
        array = read_tensor(directory / entry["file"])
        if list(array.shape) != list(entry["shape"]):
            raise TensorFormatError(f"tensor {name} shape {array.shape} disagrees with manifest")
        arrays[name] = array
    return arrays, manifest.get("metadata", {})
