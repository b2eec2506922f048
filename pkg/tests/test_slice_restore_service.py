"""
Tests for the SliceRestore adapter: merge/reslice geometry, fusion paths and no-op init.
"""
import numpy as np
import pytest

from hireslab.models.features import FeatureMap
from hireslab.models.grid import GridSpec
from hireslab.numerics.params import AttentionWeights, zeros
from hireslab.numerics.tensor import Tensor
from hireslab.services.slice_restore_service import (
    SraWeights,
    capture,
    global_fuse,
    local_fuse,
    merge,
    reslice,
    sra_forward,
)
from hireslab.utils.errors import DimensionError, PreconditionError
from tests import reference


def _grid(m, n, r=4):
    return GridSpec(r=r, m=m, n=n, canvas_h=m * r, canvas_w=n * r)


def _slices(rng, count, spatial=(2, 2), dim=4):
    return [FeatureMap(Tensor(rng.normal(size=(spatial[0] * spatial[1], dim))), spatial) for _ in range(count)]


class TestMergeReslice:

    def test_block_placement(self):
        grid = _grid(2, 3)
        slices = [FeatureMap(Tensor(np.full((4, 1), float(k))), (2, 2)) for k in range(6)]
        whole = merge(slices, grid).data[:, :, 0]
        assert whole.shape == (4, 6)
        assert whole[0, 0] == 0.0
        assert whole[0, 5] == 2.0
        assert whole[3, 2] == 4.0
        assert whole[2, 1] == 3.0

    def test_reslice_inverts_merge(self, rng):
        grid = _grid(2, 2)
        slices = _slices(rng, 4, spatial=(2, 3))
        restored = reslice(merge(slices, grid), grid, (2, 3))
        for before, after in zip(slices, restored):
            assert after.spatial == (2, 3)
            np.testing.assert_array_equal(after.tokens.data, before.tokens.data)

    def test_slice_count_mismatch(self, rng):
        with pytest.raises(DimensionError):
            merge(_slices(rng, 3), _grid(2, 2))

    def test_unequal_slices(self, rng):
        slices = _slices(rng, 1) + _slices(rng, 1, spatial=(1, 4))
        with pytest.raises(DimensionError):
            merge(slices, _grid(1, 2))


class TestFusion:

    def test_no_op_init_outputs_exact_zero(self, rng):
        host = AttentionWeights.init(8, 2, rng, std=0.5)
        w = SraWeights.from_host(host)
        np.testing.assert_array_equal(w.global_attn.wq.data, host.wq.data)
        whole = Tensor(rng.normal(size=(4, 4, 8)))
        assert np.all(capture(whole, w).data == 0.0)

    def test_local_path_crosses_slice_boundary_by_one_token(self, rng):
        w = SraWeights.init(8, 2, rng)
        w.global_attn.wo = zeros((8, 8))
        w.dw_kernel = Tensor(np.ones((3, 3, 8)))
        grid = _grid(1, 2)
        delta = np.zeros((4, 8))
        delta[1, :] = 1.0  # row 0, col 1 of slice 0: its right edge
        slices = [FeatureMap(Tensor(delta), (2, 2)), FeatureMap(Tensor(np.zeros((4, 8))), (2, 2))]
        out = sra_forward(slices, grid, w)
        right = out[1].as_grid().data
        assert np.all(right[:, 0, :] != 0.0)
        assert np.all(right[:, 1, :] == 0.0)

    def test_global_path_keeps_shape(self, rng):
        w = SraWeights.init(8, 2, rng, std=0.3)
        out = global_fuse(Tensor(rng.normal(size=(4, 6, 8))), w)
        assert out.shape == (4, 6, 8)

    def test_down_factor_must_divide_map(self, rng):
        w = SraWeights.init(8, 2, rng, down_factor=2)
        with pytest.raises(PreconditionError, match="down_factor 2 must divide"):
            global_fuse(Tensor(rng.normal(size=(3, 4, 8))), w)

    def test_sra_forward_preserves_slice_shapes(self, rng):
        grid = _grid(2, 2)
        slices = _slices(rng, 4, spatial=(2, 2), dim=8)
        out = sra_forward(slices, grid, SraWeights.init(8, 2, rng))
        assert [f.spatial for f in out] == [(2, 2)] * 4
        assert all(f.dim == 8 for f in out)

    def test_kernel_shape_checked(self, rng):
        host = AttentionWeights.init(8, 2, rng)
        w = SraWeights.from_host(host)
        with pytest.raises(DimensionError, match="dw_kernel must be"):
            SraWeights(dw_kernel=zeros((3, 3, 2)), norm=w.norm, global_attn=w.global_attn)


class TestFusionOracles:

    def test_global_fuse_matches_composition(self, rng):
        w = SraWeights.init(8, 2, rng, down_factor=2, std=0.5)
        whole = rng.normal(size=(4, 4, 8))
        out = global_fuse(Tensor(whole), w).data
        np.testing.assert_allclose(out, reference.global_fuse(whole, w), atol=1e-10)

    def test_capture_matches_oracle(self, rng):
        w = SraWeights.init(8, 2, rng, down_factor=2, std=0.5)
        whole = rng.normal(size=(4, 6, 8))
        np.testing.assert_allclose(capture(Tensor(whole), w).data, reference.capture(whole, w), atol=1e-10)

    def test_capture_is_sum_of_paths(self, rng):
        w = SraWeights.init(8, 2, rng, std=0.5)
        whole = Tensor(rng.normal(size=(4, 4, 8)))
        expected = local_fuse(whole, w.dw_kernel).data + global_fuse(whole, w).data
        np.testing.assert_array_equal(capture(whole, w).data, expected)

    def test_global_path_carries_slice_three_into_slice_zero(self, rng):
        w = SraWeights.init(8, 2, rng, std=0.5)
        grid = _grid(2, 2)
        slices = _slices(rng, 4, spatial=(4, 4), dim=8)
        moved = list(slices)
        moved[3] = FeatureMap(Tensor(slices[3].tokens.data + rng.normal(size=(16, 8))), (4, 4))
        before = sra_forward(slices, grid, w)[0].tokens.data
        after = sra_forward(moved, grid, w)[0].tokens.data
        assert np.max(np.abs(after - before)) > 1e-6

    def test_local_path_ignores_tokens_two_rows_inside(self, rng):
        w = SraWeights.init(8, 2, rng, std=0.5)
        w.global_attn.wo = zeros((8, 8))
        grid = _grid(2, 1)
        slices = _slices(rng, 2, spatial=(4, 4), dim=8)
        bumped = slices[1].as_grid().data.copy()
        bumped[2:, :, :] += 1.0
        moved = [slices[0], FeatureMap.from_grid(Tensor(bumped))]
        before = sra_forward(slices, grid, w)[0].tokens.data
        after = sra_forward(moved, grid, w)[0].tokens.data
        np.testing.assert_array_equal(after, before)


class TestStructuralInverses:

    def test_merge_reslice_round_trip_over_seeds(self):
        for seed in range(100):
            gen = np.random.default_rng(seed)
            m, n = (int(v) for v in gen.integers(1, 5, size=2))
            spatial = tuple(int(v) for v in gen.integers(1, 4, size=2))
            grid = _grid(m, n)
            slices = _slices(gen, m * n, spatial=spatial, dim=3)
            restored = reslice(merge(slices, grid), grid, spatial)
            for before, after in zip(slices, restored):
                np.testing.assert_array_equal(after.tokens.data, before.tokens.data)
