"""
Dynamic High-Resolution Slicing Service

Computes the slicing grid for arbitrary input sizes (m = ceil(H/r),
n = ceil(W/r), quadrupled when 4*m*n still fits the cap M), pads the image
onto the m*r x n*r canvas, cuts the r x r slices and builds the
low-resolution global view.
"""
import logging
import math
from typing import List, Tuple

import numpy as np

from hireslab.models.grid import GridSpec
from hireslab.models.image import ImageBuffer
from hireslab.numerics.ops import resize_bilinear
from hireslab.numerics.tensor import Tensor, no_grad
from hireslab.utils.errors import DimensionError, InvariantViolation, PreconditionError

logger = logging.getLogger(__name__)

PAD_VALUE = 0.0


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def scaled_size(height: int, width: int, scale: float) -> Tuple[int, int]:
    """Integer pixel size of an image after the oversize pre-rescale."""
    if scale >= 1.0:
        return height, width
    return (
        max(1, int(math.floor(height * scale + 1e-9))),
        max(1, int(math.floor(width * scale + 1e-9))),
    )


def _largest_fitting_scale(height: int, width: int, r: int, max_slices: int) -> float:
    """
    Largest s <= 1 with ceil(sH/r) * ceil(sW/r) <= M.

    For a candidate grid of a rows and b = M // a columns the largest fitting
    scale is min(a*r/H, b*r/W); the answer is the best candidate.
    """
    best = 0.0
    for rows in range(1, max_slices + 1):
        cols = max_slices // rows
        best = max(best, min(rows * r / height, cols * r / width))
    return min(best, 1.0)


def compute_grid(height: int, width: int, r: int, max_slices: int) -> GridSpec:
    """
    Compute the dynamic slicing grid.

    Args:
        height: Image height H in pixels
        width: Image width W in pixels
        r: Base resolution of the vision encoder
        max_slices: Slice cap M

    Returns:
        GridSpec with m * n <= M

    Raises:
        PreconditionError: If any size is below 1
    """
    if height < 1 or width < 1 or r < 1 or max_slices < 1:
        raise PreconditionError(
            f"compute_grid needs positive sizes, got H={height} W={width} r={r} M={max_slices}"
        )

    scale = 1.0
    h, w = height, width
    if _ceil_div(h, r) * _ceil_div(w, r) > max_slices:
        scale = _largest_fitting_scale(height, width, r, max_slices)
        h, w = scaled_size(height, width, scale)
        logger.info(
            f"Oversize input rescaled | H: {height} | W: {width} | "
            f"Scale: {scale:.6f} | New: {h}x{w}"
        )

    m, n = _ceil_div(h, r), _ceil_div(w, r)
    if m * n > max_slices:
        raise InvariantViolation(f"rescaled grid {m}x{n} still exceeds M={max_slices}")

    quadrupled = 4 * m * n <= max_slices
    if quadrupled:
        m, n = 2 * m, 2 * n

    grid = GridSpec(
        r=r,
        m=m,
        n=n,
        quadrupled=quadrupled,
        canvas_h=m * r,
        canvas_w=n * r,
        scale_applied=scale,
    )
    logger.debug(
        f"Grid computed | H: {height} | W: {width} | r: {r} | M: {max_slices} | "
        f"m: {m} | n: {n} | Quadrupled: {quadrupled}"
    )
    return grid


def resize_image(img: ImageBuffer, height: int, width: int) -> ImageBuffer:
    """Bilinear (half-pixel-center) resize of an image."""
    if (height, width) == (img.height, img.width):
        return img
    with no_grad():
        resized = resize_bilinear(Tensor(img.data, dtype=np.float64), height, width)
    return ImageBuffer(np.clip(resized.data, 0.0, 1.0))


def _center_pad(img: ImageBuffer, height: int, width: int) -> ImageBuffer:
    if img.height > height or img.width > width:
        raise InvariantViolation(
            f"image {img.height}x{img.width} does not fit canvas {height}x{width}"
        )
    top = (height - img.height) // 2
    left = (width - img.width) // 2
    canvas = np.full((height, width, img.channels), PAD_VALUE, dtype=np.float64)
    canvas[top:top + img.height, left:left + img.width, :] = img.data
    return ImageBuffer(canvas)


def canvas_offset(img_height: int, img_width: int, grid: GridSpec) -> Tuple[int, int]:
    """Top-left offset of the (rescaled) image on the canvas."""
    h, w = scaled_size(img_height, img_width, grid.scale_applied)
    return (grid.canvas_h - h) // 2, (grid.canvas_w - w) // 2


def pad_to_canvas(img: ImageBuffer, grid: GridSpec) -> ImageBuffer:
    """
    Center the image on the m*r x n*r canvas (pad value 0).

    Oversize inputs are first resized by ``grid.scale_applied``.

    Raises:
        InvariantViolation: If the image does not fit the canvas
    """
    h, w = scaled_size(img.height, img.width, grid.scale_applied)
    if (h, w) != (img.height, img.width):
        img = resize_image(img, h, w)
    return _center_pad(img, grid.canvas_h, grid.canvas_w)


def extract_slices(canvas: ImageBuffer, grid: GridSpec) -> List[ImageBuffer]:
    """
    Cut the canvas into m*n r x r slices in row-major order.

    Slice k = row * n + col covers rows [row*r, (row+1)*r) and
    cols [col*r, (col+1)*r).
    """
    if (canvas.height, canvas.width) != (grid.canvas_h, grid.canvas_w):
        raise DimensionError(
            f"canvas {canvas.height}x{canvas.width} does not match grid "
            f"{grid.canvas_h}x{grid.canvas_w}"
        )
    r = grid.r
    return [
        ImageBuffer(canvas.data[row * r:(row + 1) * r, col * r:(col + 1) * r, :].copy())
        for row in range(grid.m)
        for col in range(grid.n)
    ]


def stitch_slices(slices: List[ImageBuffer], grid: GridSpec) -> ImageBuffer:
    """Reassemble row-major slices into the canvas (inverse of extract_slices)."""
    if len(slices) != grid.num_slices:
        raise DimensionError(f"expected {grid.num_slices} slices, got {len(slices)}")
    for tile in slices:
        if (tile.height, tile.width) != (grid.r, grid.r):
            raise DimensionError(f"slice {tile.height}x{tile.width} is not {grid.r}x{grid.r}")
    rows = [
        np.concatenate([slices[row * grid.n + col].data for col in range(grid.n)], axis=1)
        for row in range(grid.m)
    ]
    return ImageBuffer(np.concatenate(rows, axis=0))


def lowres_view(img: ImageBuffer, r: int) -> ImageBuffer:
    """
    Aspect-preserving resize so the longer side equals r, then center-pad to r x r.
    """
    if r < 1:
        raise PreconditionError(f"base resolution must be positive, got {r}")
    if img.height >= img.width:
        h = r
        w = max(1, int(math.floor(img.width * r / img.height + 0.5)))
    else:
        w = r
        h = max(1, int(math.floor(img.height * r / img.width + 0.5)))
    return _center_pad(resize_image(img, h, w), r, r)
