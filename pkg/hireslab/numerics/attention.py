"""
Multi-head self- and cross-attention built from the primitive ops.
"""
import math
from typing import Optional, Tuple, Union

from hireslab.numerics.ops import Coords, matmul, rope2d, softmax_rows
from hireslab.numerics.params import AttentionWeights
from hireslab.numerics.tensor import Tensor
from hireslab.utils.errors import ConfigurationError, DimensionError

AttentionOutput = Union[Tensor, Tuple[Tensor, Tensor]]


def _attend(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    w: AttentionWeights,
    q_coords: Optional[Coords] = None,
    k_coords: Optional[Coords] = None,
) -> Tuple[Tensor, Tensor]:
    """
    Scaled dot-product attention per head on projected q/k/v.

    Returns:
        (merged heads [Lq, D] before the output projection, probabilities [h, Lq, Lk])
    """
    lq, dim = q.shape
    lk = k.shape[0]
    head_dim = dim // w.heads
    qh = q.reshape(lq, w.heads, head_dim)
    kh = k.reshape(lk, w.heads, head_dim)
    vh = v.reshape(lk, w.heads, head_dim)
    if w.use_rope2d:
        qh = rope2d(qh, q_coords, w.rope_base)
        kh = rope2d(kh, k_coords, w.rope_base)
    qh = qh.transpose(1, 0, 2)
    kh = kh.transpose(1, 2, 0)
    vh = vh.transpose(1, 0, 2)
    scores = matmul(qh, kh) * (1.0 / math.sqrt(head_dim))
    probs = softmax_rows(scores)
    context = matmul(probs, vh)
    merged = context.transpose(1, 0, 2).reshape(lq, dim)
    return merged, probs


def mhsa(
    x: Tensor,
    w: AttentionWeights,
    coords: Optional[Coords] = None,
    return_weights: bool = False,
) -> AttentionOutput:
    """
    Multi-head self-attention softmax(Q K^T / sqrt(D/h)) V per head, then Wo.

    Args:
        x: Tensor[L, D]
        w: Attention weights; when ``w.use_rope2d`` queries and keys are rotated
        coords: (row, col) per token, required iff ``w.use_rope2d``
        return_weights: Also return attention probabilities [h, L, L]

    Raises:
        ConfigurationError: If RoPE is enabled without coordinates
        DimensionError: If x's width does not match the weights
    """
    if x.ndim != 2 or x.shape[1] != w.dim:
        raise DimensionError(f"mhsa expects [L, {w.dim}], got {x.shape}")
    if w.use_rope2d and coords is None:
        raise ConfigurationError("attention uses 2D RoPE but no token coordinates were given")
    q = matmul(x, w.wq)
    k = matmul(x, w.wk)
    v = matmul(x, w.wv)
    merged, probs = _attend(q, k, v, w, coords, coords)
    out = matmul(merged, w.wo)
    return (out, probs) if return_weights else out


def cross_attention(
    queries: Tensor,
    kv: Tensor,
    w: AttentionWeights,
    return_weights: bool = False,
) -> AttentionOutput:
    """
    Queries attend over key/value tokens; output has one row per query.

    Args:
        queries: Tensor[Lq, D]
        kv: Tensor[L, D]
        w: Attention weights (2D RoPE is not supported here)
        return_weights: Also return attention probabilities [h, Lq, L]
    """
    if queries.ndim != 2 or kv.ndim != 2 or queries.shape[1] != kv.shape[1]:
        raise DimensionError(f"cross_attention width mismatch: {queries.shape} vs {kv.shape}")
    if queries.shape[1] != w.dim:
        raise DimensionError(f"cross_attention expects width {w.dim}, got {queries.shape[1]}")
    if w.use_rope2d:
        raise ConfigurationError("cross_attention does not take token coordinates")
    q = matmul(queries, w.wq)
    k = matmul(kv, w.wk)
    v = matmul(kv, w.wv)
    merged, probs = _attend(q, k, v, w)
    out = matmul(merged, w.wo)
    return (out, probs) if return_weights else out
