"""
Tests for the self-mining sampler.
"""
import numpy as np
import pytest

from hireslab.models.config import SamplerConfig
from hireslab.models.features import FeatureMap
from hireslab.numerics.tensor import Tensor
from hireslab.services.sampler_service import SmsWeights, pool_queries, sampled_tokens, sms_forward
from hireslab.utils.errors import ConfigurationError, PreconditionError
from tests import reference


def _features(rng, side=4, dim=8):
    return FeatureMap(Tensor(rng.normal(size=(side * side, dim))), (side, side))


class TestSampler:

    def test_output_token_count(self, rng):
        w = SmsWeights.init(8, SamplerConfig(pool_size=2, heads=2), rng)
        out = sms_forward(_features(rng), w)
        assert out.shape == (4, 8)
        assert sampled_tokens((4, 4), 2) == 4

    def test_output_is_layer_normalized(self, rng):
        w = SmsWeights.init(8, SamplerConfig(pool_size=2, heads=2), rng, std=0.3)
        out = sms_forward(_features(rng), w).data
        np.testing.assert_allclose(out.mean(axis=1), np.zeros(4), atol=1e-10)

    def test_attention_over_full_grid(self, rng):
        w = SmsWeights.init(8, SamplerConfig(pool_size=2, heads=2), rng)
        _, probs = sms_forward(_features(rng), w, return_weights=True)
        assert probs.shape == (2, 4, 16)
        np.testing.assert_allclose(probs.data.sum(axis=-1), np.ones((2, 4)), atol=1e-12)

    def test_pool_mode_returns_pooled_queries(self, rng):
        features = _features(rng)
        w = SmsWeights.init(8, SamplerConfig(pool_size=2, heads=2, mode="pool"), rng)
        out = sms_forward(features, w)
        np.testing.assert_array_equal(out.data, pool_queries(features, 2).tokens.data)
        with pytest.raises(ConfigurationError):
            sms_forward(features, w, return_weights=True)

    def test_pool_queries_block_means(self):
        tokens = np.arange(16.0).reshape(16, 1)
        pooled = pool_queries(FeatureMap(Tensor(tokens), (4, 4)), 2)
        assert pooled.spatial == (2, 2)
        np.testing.assert_array_equal(pooled.tokens.data[:, 0], [2.5, 4.5, 10.5, 12.5])

    def test_pool_size_must_divide_grid(self, rng):
        w = SmsWeights.init(8, SamplerConfig(pool_size=3, heads=2), rng)
        with pytest.raises(PreconditionError):
            sms_forward(_features(rng), w)

    def test_unknown_mode(self, rng):
        w = SmsWeights.init(8, SamplerConfig(pool_size=2, heads=2), rng)
        with pytest.raises(ConfigurationError):
            SmsWeights(
                q_norm=w.q_norm, kv_norm=w.kv_norm, cross=w.cross, ffn_norm=w.ffn_norm,
                ffn_in=w.ffn_in, ffn_out=w.ffn_out, out_norm=w.out_norm, mode="mean",
            )


class TestSamplerOracles:

    def test_matches_step_by_step_oracle(self, rng):
        w = SmsWeights.init(8, SamplerConfig(pool_size=2, heads=2), rng, std=0.5)
        features = _features(rng)
        expected = reference.sampler(features.tokens.data, features.spatial, w)
        np.testing.assert_allclose(sms_forward(features, w).data, expected, atol=1e-10)

    def test_property_transposition_equivariance(self):
        """Property: transposing the token grid transposes the sampled token grid."""
        from hypothesis import given, strategies as st

        @given(seed=st.integers(min_value=0, max_value=10_000))
        def check_transpose(seed):
            gen = np.random.default_rng(seed)
            w = SmsWeights.init(8, SamplerConfig(pool_size=2, heads=2), gen, std=0.5)
            grid = gen.normal(size=(4, 4, 8))
            transposed = grid.transpose(1, 0, 2).reshape(16, 8)
            out = sms_forward(FeatureMap(Tensor(grid.reshape(16, 8)), (4, 4)), w).data.reshape(2, 2, 8)
            moved = sms_forward(FeatureMap(Tensor(transposed), (4, 4)), w).data.reshape(2, 2, 8)
            np.testing.assert_allclose(moved, out.transpose(1, 0, 2), atol=1e-12)

        check_transpose()

    def test_constant_input_gives_identical_tokens(self, rng):
        w = SmsWeights.init(8, SamplerConfig(pool_size=2, heads=2), rng, std=0.5)
        token = rng.normal(size=(1, 8))
        out = sms_forward(FeatureMap(Tensor(np.repeat(token, 16, axis=0)), (4, 4)), w).data
        np.testing.assert_allclose(out, np.repeat(out[:1], 4, axis=0), atol=1e-12)
