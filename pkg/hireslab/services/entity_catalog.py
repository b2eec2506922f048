"""
Entity catalog and deterministic rasterizer for EntityGrid images.

Every entity is drawn inside a square box centered on its grid position.
Text and Digit entities use the 5x7 bitmap font at the largest integer
scale that fits the box; shapes and icons fill an extent of R/4 (so a
circle has radius R/8). Pixels are tested at their centers (x + 0.5, y + 0.5).
"""
import math
from typing import Dict, List, Tuple

import numpy as np

from hireslab.models.benchmark import (
    Color,
    EntityKind,
    EntitySpec,
    IconPart,
    PlacedEntity,
    Placement,
    RenderPrimitive,
)
from hireslab.models.image import ImageBuffer
from hireslab.utils import font
from hireslab.utils.errors import PlacementError, PreconditionError

BACKGROUND = 1.0
BOX_MARGIN = 2

COLORS: Dict[str, Color] = {
    "black": (0.0, 0.0, 0.0),
    "red": (0.85, 0.1, 0.1),
    "green": (0.1, 0.6, 0.2),
    "blue": (0.1, 0.25, 0.85),
    "orange": (0.95, 0.55, 0.05),
    "brown": (0.45, 0.25, 0.1),
    "yellow": (0.95, 0.85, 0.1),
    "gray": (0.5, 0.5, 0.5),
}

TEXT_WORDS = ("apple", "cat", "sun", "tree", "book", "fish", "star", "moon", "cup", "hat", "go", "ox", "up")
DIGIT_STRINGS = ("0.596", "42", "7", "3", "815", "2.5", "9", "64", "100")
SHAPE_KINDS = ("circle", "triangle", "rectangle")
SHAPE_COLORS = ("black", "red", "green", "blue")


def _part(shape: str, center, size, color: str) -> IconPart:
    return IconPart(shape=shape, center=center, size=size, color=COLORS[color])


# Icon composites in units of the entity box, centered at (0, 0); y grows downward
OBJECT_ICONS: Dict[str, List[IconPart]] = {
    "house": [
        _part("triangle", (0.0, -0.25), (1.0, 0.5), "red"),
        _part("rectangle", (0.0, 0.25), (0.7, 0.5), "brown"),
    ],
    "snowman": [
        _part("circle", (0.0, -0.28), (0.4, 0.4), "gray"),
        _part("circle", (0.0, 0.2), (0.6, 0.6), "gray"),
    ],
    "traffic light": [
        _part("rectangle", (0.0, 0.0), (0.4, 1.0), "black"),
        _part("circle", (0.0, -0.3), (0.24, 0.24), "red"),
        _part("circle", (0.0, 0.0), (0.24, 0.24), "yellow"),
        _part("circle", (0.0, 0.3), (0.24, 0.24), "green"),
    ],
    "flag": [
        _part("rectangle", (-0.4, 0.0), (0.1, 1.0), "black"),
        _part("rectangle", (0.1, -0.25), (0.9, 0.5), "blue"),
    ],
    "mushroom": [
        _part("triangle", (0.0, -0.2), (1.0, 0.6), "red"),
        _part("rectangle", (0.0, 0.3), (0.3, 0.4), "brown"),
    ],
    "lollipop": [
        _part("circle", (0.0, -0.2), (0.6, 0.6), "orange"),
        _part("rectangle", (0.0, 0.3), (0.1, 0.4), "black"),
    ],
}

RELPOS_ICONS: Dict[str, List[IconPart]] = {
    "circle above square": [
        _part("circle", (0.0, -0.25), (0.45, 0.45), "red"),
        _part("rectangle", (0.0, 0.25), (0.45, 0.45), "blue"),
    ],
    "square above circle": [
        _part("rectangle", (0.0, -0.25), (0.45, 0.45), "blue"),
        _part("circle", (0.0, 0.25), (0.45, 0.45), "red"),
    ],
    "circle left of square": [
        _part("circle", (-0.25, 0.0), (0.45, 0.45), "red"),
        _part("rectangle", (0.25, 0.0), (0.45, 0.45), "blue"),
    ],
    "square left of circle": [
        _part("rectangle", (-0.25, 0.0), (0.45, 0.45), "blue"),
        _part("circle", (0.25, 0.0), (0.45, 0.45), "red"),
    ],
}


def box_size(R: int) -> int:
    """Side of the square box an entity must fit in (R/2 minus a margin)."""
    return R // 2 - BOX_MARGIN


def shape_extent(R: int) -> float:
    return R / 4.0


def glyph_scale(text: str, R: int) -> int:
    """Largest integer font scale whose ink fits the entity box (0 if none)."""
    box = box_size(R)
    width = font.text_width(text)
    if width == 0:
        return 0
    return max(0, min(box // width, box // font.GLYPH_HEIGHT))


def _build_catalog() -> List[EntitySpec]:
    entities: List[EntitySpec] = []
    for word in TEXT_WORDS:
        entities.append(EntitySpec(
            id=f"text-{word}", kind=EntityKind.TEXT, label=word,
            render=RenderPrimitive(type="glyphs", text=word),
        ))
    for digits in DIGIT_STRINGS:
        entities.append(EntitySpec(
            id=f"digit-{digits}", kind=EntityKind.DIGIT, label=digits,
            render=RenderPrimitive(type="glyphs", text=digits),
        ))
    for shape in SHAPE_KINDS:
        for color in SHAPE_COLORS:
            entities.append(EntitySpec(
                id=f"shape-{color}-{shape}", kind=EntityKind.SHAPE, label=f"{color} {shape}",
                render=RenderPrimitive(type=shape, color=COLORS[color]),
            ))
    for name, parts in OBJECT_ICONS.items():
        entities.append(EntitySpec(
            id=f"object-{name.replace(' ', '-')}", kind=EntityKind.OBJECT, label=name,
            render=RenderPrimitive(type="icon", parts=parts),
        ))
    for name, parts in RELPOS_ICONS.items():
        entities.append(EntitySpec(
            id=f"relpos-{name.replace(' ', '-')}", kind=EntityKind.RELPOS, label=name,
            render=RenderPrimitive(type="icon", parts=parts),
        ))
    return entities


CATALOG: List[EntitySpec] = _build_catalog()


def fits(entity: EntitySpec, R: int) -> bool:
    if entity.render.type == "glyphs":
        return glyph_scale(entity.render.text, R) >= 1
    return shape_extent(R) <= box_size(R) and shape_extent(R) >= 2.0


def catalog_for(R: int) -> List[EntitySpec]:
    """
    Entities that fit one grid cell at resolution R.

    Raises:
        PreconditionError: If fewer than four entities fit (no distractors possible)
    """
    entities = [entity for entity in CATALOG if fits(entity, R)]
    if len(entities) < 4:
        raise PreconditionError(f"only {len(entities)} entities fit a cell at R={R}")
    return entities


def position_centers(R: int) -> List[Placement]:
    """
    Nine placements on the {R/2, R, 3R/2} lattice, numbered row-major 1..9.

    Raises:
        PreconditionError: If R < 1
    """
    if R < 1:
        raise PreconditionError(f"R must be positive, got {R}")
    return [
        Placement(position=p, x=((p - 1) % 3 + 1) * R / 2.0, y=((p - 1) // 3 + 1) * R / 2.0)
        for p in range(1, 10)
    ]


def on_slice_boundary(placement: Placement, R: int) -> bool:
    """Whether the center lies on a boundary of the 2x2 slicing of the 2R canvas."""
    return placement.x == R or placement.y == R


def geometric_partition(R: int) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """(edge positions, center positions) computed from the lattice geometry."""
    placements = position_centers(R)
    edge = tuple(pl.position for pl in placements if on_slice_boundary(pl, R))
    center = tuple(pl.position for pl in placements if not on_slice_boundary(pl, R))
    return edge, center


def bounding_box(entity: EntitySpec, placement: Placement, R: int) -> Tuple[float, float, float, float]:
    """(x0, y0, x1, y1) of the entity's ink region."""
    if entity.render.type == "glyphs":
        scale = glyph_scale(entity.render.text, R)
        half_w = font.text_width(entity.render.text) * scale / 2.0
        half_h = font.GLYPH_HEIGHT * scale / 2.0
    else:
        half_w = half_h = shape_extent(R) / 2.0
    return placement.x - half_w, placement.y - half_h, placement.x + half_w, placement.y + half_h


def _overlaps(a, b) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def _fill(canvas: np.ndarray, mask: np.ndarray, y0: int, x0: int, color: Color) -> None:
    canvas[y0:y0 + mask.shape[0], x0:x0 + mask.shape[1]][mask] = color


def _shape_mask(shape: str, cx: float, cy: float, w: float, h: float, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    px = xs + 0.5
    py = ys + 0.5
    if shape == "circle":
        rx, ry = w / 2.0, h / 2.0
        return ((px - cx) / rx) ** 2 + ((py - cy) / ry) ** 2 <= 1.0
    if shape == "rectangle":
        return (np.abs(px - cx) <= w / 2.0) & (np.abs(py - cy) <= h / 2.0)
    # upward triangle: apex at the top edge, base at the bottom edge
    top = cy - h / 2.0
    depth = (py - top) / h
    return (depth >= 0.0) & (depth <= 1.0) & (np.abs(px - cx) <= depth * w / 2.0)


def _draw_shape(canvas: np.ndarray, shape: str, cx: float, cy: float, w: float, h: float, color: Color) -> None:
    height, width, _ = canvas.shape
    x0 = max(0, int(math.floor(cx - w / 2.0)) - 1)
    x1 = min(width, int(math.ceil(cx + w / 2.0)) + 1)
    y0 = max(0, int(math.floor(cy - h / 2.0)) - 1)
    y1 = min(height, int(math.ceil(cy + h / 2.0)) + 1)
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    mask = _shape_mask(shape, cx, cy, w, h, xs.astype(np.float64), ys.astype(np.float64))
    _fill(canvas, mask, y0, x0, color)


def draw_entity(canvas: np.ndarray, entity: EntitySpec, placement: Placement, R: int) -> None:
    render = entity.render
    if render.type == "glyphs":
        mask = font.render_text(render.text, glyph_scale(render.text, R))
        y0 = int(math.floor(placement.y - mask.shape[0] / 2.0))
        x0 = int(math.floor(placement.x - mask.shape[1] / 2.0))
        _fill(canvas, mask, y0, x0, render.color)
        return
    extent = shape_extent(R)
    if render.type == "icon":
        for part in render.parts:
            _draw_shape(
                canvas,
                part.shape,
                placement.x + part.center[0] * extent,
                placement.y + part.center[1] * extent,
                part.size[0] * extent,
                part.size[1] * extent,
                part.color,
            )
        return
    _draw_shape(canvas, render.type, placement.x, placement.y, extent, extent, render.color)


def check_overlap(entities: List[PlacedEntity], R: int) -> None:
    """
    Raises:
        PlacementError: If two entities' bounding boxes overlap
    """
    by_position = {pl.position: pl for pl in position_centers(R)}
    boxes = []
    for placed in entities:
        box = bounding_box(placed.entity, by_position[placed.position], R)
        for other_position, other in boxes:
            if _overlaps(box, other):
                raise PlacementError(
                    f"entities at positions {other_position} and {placed.position} overlap"
                )
        boxes.append((placed.position, box))


def render_image(entities: List[PlacedEntity], R: int) -> ImageBuffer:
    """
    Rasterize entities on a white 2R x 2R RGB canvas.

    Raises:
        PlacementError: If two entities' bounding boxes overlap
    """
    check_overlap(entities, R)
    by_position = {pl.position: pl for pl in position_centers(R)}
    canvas = np.full((2 * R, 2 * R, 3), BACKGROUND, dtype=np.float64)
    for placed in entities:
        draw_entity(canvas, placed.entity, by_position[placed.position], R)
    return ImageBuffer(canvas)
