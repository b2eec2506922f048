"""
Binary PPM (P6) and PGM (P5) reading and writing, maxval 255.
"""
from pathlib import Path

import numpy as np

from hireslab.models.image import ImageBuffer
from hireslab.utils.errors import TensorFormatError
from hireslab.utils.files import PathLike, atomic_write_bytes

WHITESPACE = (9, 10, 13, 32)


def _read_token(data: bytes, idx: int):
    size = len(data)
    while idx < size:
        b = data[idx]
        if b == 35:  # '#'
            while idx < size and data[idx] not in (10, 13):
                idx += 1
        elif b in WHITESPACE:
            idx += 1
        else:
            break
    start = idx
    while idx < size and data[idx] not in WHITESPACE:
        idx += 1
    if start == idx:
        raise TensorFormatError("invalid PNM header")
    return data[start:idx], idx


def quantize(img: ImageBuffer) -> np.ndarray:
    """Map [0, 1] values to uint8 with round-half-to-even."""
    return np.round(np.clip(img.data, 0.0, 1.0) * 255.0).astype(np.uint8)


def encode_pnm(img: ImageBuffer) -> bytes:
    """P6 for RGB images, P5 for single-channel images."""
    magic = b"P6" if img.channels == 3 else b"P5"
    header = magic + b"\n%d %d\n255\n" % (img.width, img.height)
    return header + quantize(img).tobytes(order="C")


def decode_pnm(data: bytes) -> ImageBuffer:
    """
    Parse P5/P6 bytes into an ImageBuffer with values byte / 255.

    Raises:
        TensorFormatError: On unsupported magic, maxval or payload size
    """
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise TensorFormatError(f"not a binary PPM/PGM file (magic {magic!r})")
    channels = 3 if magic == b"P6" else 1
    width_bytes, idx = _read_token(data, 2)
    height_bytes, idx = _read_token(data, idx)
    maxval_bytes, idx = _read_token(data, idx)
    width, height, maxval = int(width_bytes), int(height_bytes), int(maxval_bytes)
    if maxval != 255:
        raise TensorFormatError(f"only maxval 255 is supported, got {maxval}")
    # exactly one whitespace byte separates the header from the raster
    payload = data[idx + 1:]
    expected = width * height * channels
    if len(payload) != expected:
        raise TensorFormatError(f"unexpected payload size ({len(payload)} vs {expected})")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return ImageBuffer(pixels.astype(np.float64) / 255.0)


def read_image(path: PathLike) -> ImageBuffer:
    return decode_pnm(Path(path).read_bytes())


def write_image(path: PathLike, img: ImageBuffer) -> Path:
    return atomic_write_bytes(path, encode_pnm(img))
