"""
Self-Mining Sampler Service

Compresses a token grid by S x S: average-pooled tokens become the queries
of one cross-attention block over the full grid (no positional rotation),
followed by a pre-norm FFN and an output layer norm. Both sublayers keep a
shortcut:

    Q0 = pool(P)
    Q1 = Q0 + CrossAttn(q_norm(Q0), kv_norm(P))
    Q2 = Q1 + FFN(ffn_norm(Q1))
    out = out_norm(Q2)

The same weights process the low-resolution view and every slice.
"""
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from hireslab.models.config import SamplerConfig
from hireslab.models.features import FeatureMap
from hireslab.numerics.attention import cross_attention
from hireslab.numerics.ops import avg_pool2d, gelu, layer_norm, linear
from hireslab.numerics.params import INIT_STD, AttentionWeights, LayerNormWeights, LinearWeights
from hireslab.numerics.tensor import Tensor
from hireslab.utils.errors import ConfigurationError

SAMPLER_MODES = ("sms", "pool")


@dataclass
class SmsWeights:
    q_norm: LayerNormWeights
    kv_norm: LayerNormWeights
    cross: AttentionWeights
    ffn_norm: LayerNormWeights
    ffn_in: LinearWeights
    ffn_out: LinearWeights
    out_norm: LayerNormWeights
    pool_size: int = 2
    mode: str = "sms"

    def __post_init__(self):
        if self.mode not in SAMPLER_MODES:
            raise ConfigurationError(f"sampler mode must be one of {SAMPLER_MODES}, got {self.mode!r}")
        if self.cross.use_rope2d:
            raise ConfigurationError("sampler cross-attention does not use 2D RoPE")

    @property
    def dim(self) -> int:
        return self.cross.dim

    @classmethod
    def init(
        cls,
        dim: int,
        cfg: SamplerConfig,
        rng: np.random.Generator,
        std: float = INIT_STD,
    ) -> "SmsWeights":
        hidden = max(1, int(round(dim * cfg.ffn_ratio)))
        return cls(
            q_norm=LayerNormWeights.init(dim),
            kv_norm=LayerNormWeights.init(dim),
            cross=AttentionWeights.init(dim, cfg.heads, rng, std=std),
            ffn_norm=LayerNormWeights.init(dim),
            ffn_in=LinearWeights.init(dim, hidden, rng, std),
            ffn_out=LinearWeights.init(hidden, dim, rng, std),
            out_norm=LayerNormWeights.init(dim),
            pool_size=cfg.pool_size,
            mode=cfg.mode,
        )


def pool_queries(features: FeatureMap, pool_size: int) -> FeatureMap:
    """S x S average pooling of the token grid (PreconditionError unless S divides it)."""
    return FeatureMap.from_grid(avg_pool2d(features.as_grid(), pool_size))


def _norm(x: Tensor, weights: LayerNormWeights) -> Tensor:
    return layer_norm(x, weights.gamma, weights.beta)


def sms_forward(
    features: FeatureMap,
    w: SmsWeights,
    return_weights: bool = False,
) -> Union[Tensor, Tuple[Tensor, Tensor]]:
    """
    Compress a feature map to (H/S) * (W/S) tokens.

    Args:
        features: Token grid P
        w: Sampler weights
        return_weights: Also return cross-attention probabilities [heads, Lq, L]

    Returns:
        Tensor[(H/S) * (W/S), D], optionally with the attention probabilities

    Raises:
        ConfigurationError: If attention probabilities are requested from the pooling-only sampler
    """
    queries = pool_queries(features, w.pool_size).tokens
    if w.mode == "pool":
        if return_weights:
            raise ConfigurationError("the pooling-only sampler has no attention weights")
        return queries
    attended, probs = cross_attention(
        _norm(queries, w.q_norm), _norm(features.tokens, w.kv_norm), w.cross, return_weights=True
    )
    q1 = queries + attended
    hidden = gelu(linear(_norm(q1, w.ffn_norm), w.ffn_in.weight, w.ffn_in.bias))
    q2 = q1 + linear(hidden, w.ffn_out.weight, w.ffn_out.bias)
    out = _norm(q2, w.out_norm)
    return (out, probs) if return_weights else out


def sampled_tokens(spatial: Tuple[int, int], pool_size: int) -> int:
    """Output token count for a grid of the given spatial shape."""
    return (spatial[0] // pool_size) * (spatial[1] // pool_size)
