"""
Tests for the entity catalog, grid geometry and rasterizer.
"""
import pytest

from hireslab.models.benchmark import CENTER_POSITIONS, EDGE_POSITIONS, PlacedEntity
from hireslab.services.entity_catalog import (
    CATALOG,
    catalog_for,
    check_overlap,
    geometric_partition,
    glyph_scale,
    position_centers,
    render_image,
)
from hireslab.utils.errors import PlacementError, PreconditionError


def _entity(entity_id):
    return next(entity for entity in CATALOG if entity.id == entity_id)


class TestGeometry:

    def test_lattice_centers(self):
        centers = position_centers(28)
        assert (centers[0].x, centers[0].y) == (14.0, 14.0)
        assert (centers[4].x, centers[4].y) == (28.0, 28.0)
        assert (centers[8].x, centers[8].y) == (42.0, 42.0)
        assert [pl.position for pl in centers] == list(range(1, 10))

    def test_partition_from_geometry(self):
        edge, center = geometric_partition(28)
        assert edge == EDGE_POSITIONS == (2, 4, 5, 6, 8)
        assert center == CENTER_POSITIONS == (1, 3, 7, 9)

    def test_invalid_resolution(self):
        with pytest.raises(PreconditionError):
            position_centers(0)


class TestCatalog:

    def test_ids_are_unique(self):
        ids = [entity.id for entity in CATALOG]
        assert len(ids) == len(set(ids))

    def test_small_canvas_keeps_short_labels_only(self):
        fitting = {entity.id for entity in catalog_for(28)}
        assert "text-go" in fitting
        assert "text-apple" not in fitting
        assert "shape-black-circle" in fitting

    def test_glyph_scale_grows_with_resolution(self):
        assert glyph_scale("apple", 28) == 0
        assert glyph_scale("apple", 224) >= 2

    def test_tiny_canvas_rejected(self):
        with pytest.raises(PreconditionError):
            catalog_for(4)


class TestRender:

    def test_circle_at_center_position(self):
        R = 28
        img = render_image([PlacedEntity(entity=_entity("shape-black-circle"), position=5)], R)
        assert (img.height, img.width, img.channels) == (2 * R, 2 * R, 3)
        assert img.data[R, R].tolist() == [0.0, 0.0, 0.0]
        assert img.data[R // 4, R // 4].tolist() == [1.0, 1.0, 1.0]

    def test_render_is_deterministic(self):
        placed = [
            PlacedEntity(entity=_entity("text-go"), position=1),
            PlacedEntity(entity=_entity("shape-red-triangle"), position=9),
        ]
        assert (render_image(placed, 28).data == render_image(placed, 28).data).all()

    def test_overlap_detected(self):
        word = _entity("text-go")
        placed = [PlacedEntity(entity=word, position=1), PlacedEntity(entity=word, position=1)]
        with pytest.raises(PlacementError):
            check_overlap(placed, 28)
