"""
Slicing commands: grid, slice, lowres.
"""
import argparse
import logging
from pathlib import Path

from hireslab.commands import emit
from hireslab.config import settings
from hireslab.services.slicer_service import compute_grid, extract_slices, lowres_view, pad_to_canvas
from hireslab.utils.files import atomic_write_json
from hireslab.utils.image_io import read_image, write_image

logger = logging.getLogger(__name__)


def _slice_file_name(index: int, channels: int) -> str:
    return f"slice_{index:02d}.{'pgm' if channels == 1 else 'ppm'}"


def run_grid(args: argparse.Namespace) -> int:
    grid = compute_grid(args.height, args.width, args.base, args.max_slices)
    emit(args, grid.model_dump(mode="json"))
    return 0


def run_slice(args: argparse.Namespace) -> int:
    img = read_image(args.image)
    grid = compute_grid(img.height, img.width, args.base, args.max_slices)
    slices = extract_slices(pad_to_canvas(img, grid), grid)
    out_dir = Path(args.out)
    files = []
    for index, piece in enumerate(slices):
        name = _slice_file_name(index, piece.channels)
        write_image(out_dir / name, piece)
        files.append(name)
    atomic_write_json(out_dir / "grid.json", {"grid": grid.model_dump(mode="json"), "slices": files})
    logger.info(f"Slices written | Dir: {out_dir} | Grid: {grid.m}x{grid.n}")
    emit(args, {"grid": grid.model_dump(mode="json"), "slices": files})
    return 0


def run_lowres(args: argparse.Namespace) -> int:
    view = lowres_view(read_image(args.image), args.base)
    write_image(args.out, view)
    emit(args, {"height": view.height, "width": view.width, "out": str(args.out)})
    return 0


def register(subparsers) -> None:
    grid = subparsers.add_parser("grid", help="Compute the slicing grid for an image size")
    grid.add_argument("--height", type=int, required=True)
    grid.add_argument("--width", type=int, required=True)
    grid.add_argument("--base", type=int, default=settings.base_resolution, help="Slice side r")
    grid.add_argument("--max-slices", type=int, default=settings.max_slices, help="Slice cap M")
    grid.set_defaults(handler=run_grid)

    slc = subparsers.add_parser("slice", help="Cut an image into base-resolution slices")
    slc.add_argument("--image", required=True, help="PPM/PGM input")
    slc.add_argument("--base", type=int, default=settings.base_resolution)
    slc.add_argument("--max-slices", type=int, default=settings.max_slices)
    slc.add_argument("--out", required=True, help="Output directory")
    slc.set_defaults(handler=run_slice)

    low = subparsers.add_parser("lowres", help="Write the padded low-resolution overview")
    low.add_argument("--image", required=True)
    low.add_argument("--base", type=int, default=settings.base_resolution)
    low.add_argument("--out", required=True, help="Output PPM/PGM path")
    low.set_defaults(handler=run_lowres)
