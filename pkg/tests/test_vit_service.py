"""
Tests for the tiny ViT encoder and its adapter hook.
"""
import numpy as np
import pytest

from hireslab.models.features import FeatureMap
from hireslab.models.grid import GridSpec
from hireslab.models.image import ImageBuffer
from hireslab.numerics.params import zeros
from hireslab.numerics.tensor import Tensor
from hireslab.services.slice_restore_service import SraWeights
from hireslab.services.vit_service import encode_views, encoder_forward, init_vit_weights, patch_embed, patchify
from hireslab.utils.errors import ConfigurationError, DimensionError
from tests import reference


class TestPatchify:

    def test_patch_order(self):
        data = np.zeros((4, 4, 1))
        data[0, 3] = 1.0
        patches = patchify(ImageBuffer(data), 2)
        assert patches.shape == (4, 4)
        # pixel (0, 3) sits in patch 1 at (py=0, px=1)
        assert patches[1, 1] == 1.0
        assert patches.sum() == 1.0

    def test_embed_shape(self, small_vit_config, rng):
        w = init_vit_weights(small_vit_config, rng)
        features = patch_embed(ImageBuffer(rng.uniform(size=(8, 8, 3))), w)
        assert features.spatial == (2, 2)
        assert features.dim == 8

    def test_wrong_input_size(self, small_vit_config, rng):
        w = init_vit_weights(small_vit_config, rng)
        with pytest.raises(DimensionError):
            patch_embed(ImageBuffer.blank(9, 9), w)
        with pytest.raises(DimensionError):
            patch_embed(ImageBuffer.blank(8, 8, channels=1), w)


class TestEncoder:

    def _views(self, rng, count):
        return [ImageBuffer(rng.uniform(size=(8, 8, 3))) for _ in range(count)]

    def test_slices_are_independent_without_adapters(self, small_vit_config, rng):
        w = init_vit_weights(small_vit_config, rng, std=0.3)
        grid = GridSpec(r=8, m=1, n=2, canvas_h=8, canvas_w=16)
        views = self._views(rng, 2)
        joint = encode_views(views, grid, w)
        alone = encode_views(views[:1], GridSpec.single(8), w)
        np.testing.assert_array_equal(joint[0].tokens.data, alone[0].tokens.data)

    def test_no_op_adapter_is_bitwise_identity(self, small_vit_config, rng):
        w = init_vit_weights(small_vit_config, rng, std=0.3)
        adapters = {1: SraWeights.from_host(w.layers[1].attn)}
        grid = GridSpec(r=8, m=2, n=2, canvas_h=16, canvas_w=16)
        views = self._views(rng, 4)
        plain = encode_views(views, grid, w)
        adapted = encode_views(views, grid, w, adapters)
        for a, b in zip(plain, adapted):
            np.testing.assert_array_equal(a.tokens.data, b.tokens.data)

    def test_active_adapter_mixes_slices(self, small_vit_config, rng):
        w = init_vit_weights(small_vit_config, rng, std=0.3)
        adapters = {1: SraWeights.init(8, 2, rng, std=0.3)}
        grid = GridSpec(r=8, m=1, n=2, canvas_h=8, canvas_w=16)
        views = self._views(rng, 2)
        base = encode_views(views, grid, w, adapters)
        changed = encode_views([views[0], ImageBuffer.blank(8, 8, value=0.5)], grid, w, adapters)
        assert not np.allclose(base[0].tokens.data, changed[0].tokens.data)

    def test_adapter_index_out_of_range(self, small_vit_config, rng):
        w = init_vit_weights(small_vit_config, rng)
        adapters = {5: SraWeights.from_host(w.layers[0].attn)}
        with pytest.raises(ConfigurationError):
            encode_views(self._views(rng, 1), GridSpec.single(8), w, adapters)


def _straight_line_encoder(tokens, m, n, spatial, w, adapter_layer, sra):
    """Depth-wise loop over plain arrays with the adapter written inline."""
    h_t, w_t = spatial
    xs = [x.copy() for x in tokens]
    for index, layer in enumerate(w.layers):
        normed = [reference.layer_norm(x, layer.ln1.gamma.data, layer.ln1.beta.data) for x in xs]
        xs = [x + reference.attention(h, h, layer.attn) for x, h in zip(xs, normed)]
        if index == adapter_layer:
            blocks = [h.reshape(h_t, w_t, -1) for h in normed]
            whole = np.concatenate(
                [np.concatenate(blocks[row * n:(row + 1) * n], axis=1) for row in range(m)], axis=0
            )
            fused = reference.capture(whole, sra)
            for k in range(m * n):
                row, col = divmod(k, n)
                block = fused[row * h_t:(row + 1) * h_t, col * w_t:(col + 1) * w_t]
                xs[k] = xs[k] + block.reshape(h_t * w_t, -1)
        for k, x in enumerate(xs):
            h = reference.layer_norm(x, layer.ln2.gamma.data, layer.ln2.beta.data)
            hidden = reference.gelu(h @ layer.fc1.weight.data + layer.fc1.bias.data)
            xs[k] = x + hidden @ layer.fc2.weight.data + layer.fc2.bias.data
    return xs


class TestEncoderOracles:

    def test_depth_two_matches_straight_line_oracle(self, small_vit_config, rng):
        w = init_vit_weights(small_vit_config, rng, std=0.3)
        sra = SraWeights.init(8, 2, rng, std=0.3)
        grid = GridSpec(r=8, m=2, n=2, canvas_h=16, canvas_w=16)
        tokens = [rng.normal(size=(4, 8)) for _ in range(4)]
        out = encoder_forward([FeatureMap(Tensor(x), (2, 2)) for x in tokens], grid, w, {1: sra})
        expected = _straight_line_encoder(tokens, 2, 2, (2, 2), w, 1, sra)
        for feature, oracle in zip(out, expected):
            np.testing.assert_allclose(feature.tokens.data, oracle, atol=1e-10)

    def test_zero_adapter_identity_over_twenty_slice_sets(self, small_vit_config):
        grid = GridSpec(r=8, m=2, n=2, canvas_h=16, canvas_w=16)
        for seed in range(20):
            gen = np.random.default_rng(seed)
            w = init_vit_weights(small_vit_config, gen, std=0.3)
            sra = SraWeights.init(8, 2, gen, std=0.3)
            sra.dw_kernel = zeros((3, 3, 8))
            sra.global_attn.wo = zeros((8, 8))
            slices = [FeatureMap(Tensor(gen.normal(size=(4, 8))), (2, 2)) for _ in range(4)]
            plain = encoder_forward(slices, grid, w)
            adapted = encoder_forward(slices, grid, w, {1: sra})
            for a, b in zip(plain, adapted):
                np.testing.assert_array_equal(a.tokens.data, b.tokens.data)
