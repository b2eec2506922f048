"""
Primitive tensor operations with forward and backward passes.

Every function takes and returns Tensors. Backward closures are attached only
when at least one input requires gradients, so inference under ``no_grad`` (or
with frozen weights) costs a single numpy evaluation per op.
"""
import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from hireslab.config import settings
from hireslab.numerics.tensor import Tensor
from hireslab.utils.errors import ConfigurationError, DimensionError, PreconditionError

# GELU tanh approximation: 0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 * x^3)))
GELU_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
GELU_CUBIC = 0.044715

Coords = Union[np.ndarray, Sequence[Tuple[int, int]]]


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product C[..., i, j] = sum_k A[..., i, k] * B[..., k, j].

    Leading (batch) dimensions follow numpy broadcasting.

    Raises:
        DimensionError: If either operand has rank < 2 or inner dimensions differ
    """
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    out = Tensor._result(np.matmul(a.data, b.data), (a, b), "matmul")
    if out.requires_grad:
        def _backward() -> None:
            a._accumulate(np.matmul(out.grad, np.swapaxes(b.data, -1, -2)))
            b._accumulate(np.matmul(np.swapaxes(a.data, -1, -2), out.grad))
        out._backward = _backward
    return out


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Affine map x @ weight + bias."""
    out = matmul(x, weight)
    return out + bias if bias is not None else out


def softmax_rows(x: Tensor) -> Tensor:
    """
    Softmax over the last axis with per-row max subtraction.

    Each row of the result is nonnegative and sums to 1.
    """
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    probs = exps / exps.sum(axis=-1, keepdims=True)
    out = Tensor._result(probs, (x,), "softmax")
    if out.requires_grad:
        def _backward() -> None:
            inner = (out.grad * probs).sum(axis=-1, keepdims=True)
            x._accumulate(probs * (out.grad - inner))
        out._backward = _backward
    return out


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: Optional[float] = None) -> Tensor:
    """
    Normalize each token (last axis) to zero mean and unit variance, then scale and shift.

    Args:
        x: Tensor[..., D]
        gamma: Tensor[D] scale
        beta: Tensor[D] shift
        eps: Variance floor; defaults to settings.layer_norm_eps

    Returns:
        Tensor of the same shape as x
    """
    if x.shape[-1] != gamma.shape[-1] or x.shape[-1] != beta.shape[-1]:
        raise DimensionError(
            f"layer_norm affine params {gamma.shape}/{beta.shape} do not match input {x.shape}"
        )
    eps = settings.layer_norm_eps if eps is None else eps
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv_std
    out = Tensor._result(x_hat * gamma.data + beta.data, (x, gamma, beta), "layer_norm")
    if out.requires_grad:
        def _backward() -> None:
            g = out.grad
            reduce_axes = tuple(range(g.ndim - 1))
            gamma._accumulate((g * x_hat).sum(axis=reduce_axes))
            beta._accumulate(g.sum(axis=reduce_axes))
            d_hat = g * gamma.data
            n = x.data.shape[-1]
            x._accumulate(
                inv_std
                * (
                    d_hat
                    - d_hat.mean(axis=-1, keepdims=True)
                    - x_hat * (d_hat * x_hat).sum(axis=-1, keepdims=True) / n
                )
            )
        out._backward = _backward
    return out


def gelu(x: Tensor) -> Tensor:
    """Smooth x * Phi(x) nonlinearity using the tanh approximation."""
    u = GELU_SQRT_2_OVER_PI * (x.data + GELU_CUBIC * x.data ** 3)
    t = np.tanh(u)
    out = Tensor._result(0.5 * x.data * (1.0 + t), (x,), "gelu")
    if out.requires_grad:
        def _backward() -> None:
            du = GELU_SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_CUBIC * x.data ** 2)
            local = 0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t * t) * du
            x._accumulate(out.grad * local)
        out._backward = _backward
    return out


def depthwise_conv3x3(f: Tensor, kernel: Tensor) -> Tensor:
    """
    Per-channel 3x3 cross-correlation with one pixel of zero padding.

    out[i, j, d] = sum_{a,b} pad(F)[i + a, j + b, d] * K[a, b, d]

    Args:
        f: Tensor[H, W, D]
        kernel: Tensor[3, 3, D]

    Returns:
        Tensor[H, W, D]
    """
    if f.ndim != 3:
        raise DimensionError(f"depthwise_conv3x3 expects [H, W, D], got {f.shape}")
    if kernel.shape != (3, 3, f.shape[2]):
        raise DimensionError(f"kernel shape {kernel.shape} does not match channels {f.shape[2]}")
    h, w, _ = f.shape
    padded = np.pad(f.data, ((1, 1), (1, 1), (0, 0)))
    result = np.zeros_like(f.data)
    for a in range(3):
        for b in range(3):
            result = result + padded[a:a + h, b:b + w, :] * kernel.data[a, b, :]
    out = Tensor._result(result, (f, kernel), "depthwise_conv3x3")
    if out.requires_grad:
        def _backward() -> None:
            g = out.grad
            grad_kernel = np.zeros_like(kernel.data)
            grad_padded = np.zeros_like(padded)
            for a in range(3):
                for b in range(3):
                    grad_kernel[a, b, :] = (padded[a:a + h, b:b + w, :] * g).sum(axis=(0, 1))
                    grad_padded[a:a + h, b:b + w, :] += g * kernel.data[a, b, :]
            kernel._accumulate(grad_kernel)
            f._accumulate(grad_padded[1:h + 1, 1:w + 1, :])
        out._backward = _backward
    return out


def avg_pool2d(f: Tensor, s: int) -> Tensor:
    """
    Non-overlapping S x S average pooling over the two spatial axes.

    Raises:
        PreconditionError: If S does not divide H and W
    """
    if f.ndim != 3:
        raise DimensionError(f"avg_pool2d expects [H, W, D], got {f.shape}")
    h, w, d = f.shape
    if s < 1 or h % s or w % s:
        raise PreconditionError(f"pool size {s} must divide spatial size {h}x{w}")
    pooled = f.data.reshape(h // s, s, w // s, s, d).mean(axis=(1, 3))
    out = Tensor._result(pooled, (f,), "avg_pool2d")
    if out.requires_grad:
        def _backward() -> None:
            spread = np.repeat(np.repeat(out.grad, s, axis=0), s, axis=1)
            f._accumulate(spread / (s * s))
        out._backward = _backward
    return out


def interpolation_matrix(n_in: int, n_out: int) -> np.ndarray:
    """
    Linear interpolation weights for half-pixel-center resampling.

    Source coordinate for output index i is (i + 0.5) * n_in / n_out - 0.5,
    clamped to [0, n_in - 1]. Each row sums to 1.
    """
    scale = n_in / n_out
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    weights = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.arange(n_out)
    np.add.at(weights, (rows, lo), 1.0 - frac)
    np.add.at(weights, (rows, hi), frac)
    return weights


def resize_bilinear(f: Tensor, h2: int, w2: int) -> Tensor:
    """
    Bilinear resize of a [H, W, D] map with align-corners=false semantics.

    Args:
        f: Tensor[H, W, D]
        h2: Output height (>= 1)
        w2: Output width (>= 1)

    Returns:
        Tensor[h2, w2, D]
    """
    if f.ndim != 3:
        raise DimensionError(f"resize_bilinear expects [H, W, D], got {f.shape}")
    if h2 < 1 or w2 < 1:
        raise PreconditionError(f"resize target must be at least 1x1, got {h2}x{w2}")
    h, w, _ = f.shape
    rows = interpolation_matrix(h, h2).astype(f.dtype)
    cols = interpolation_matrix(w, w2).astype(f.dtype)
    tmp = np.tensordot(rows, f.data, axes=(1, 0))
    result = np.einsum("jb,ibd->ijd", cols, tmp)
    out = Tensor._result(result, (f,), "resize_bilinear")
    if out.requires_grad:
        def _backward() -> None:
            grad_tmp = np.einsum("jb,ijd->ibd", cols, out.grad)
            f._accumulate(np.tensordot(rows.T, grad_tmp, axes=(1, 0)))
        out._backward = _backward
    return out


def _rotate_pairs(x: np.ndarray) -> np.ndarray:
    rotated = np.empty_like(x)
    rotated[..., 0::2] = -x[..., 1::2]
    rotated[..., 1::2] = x[..., 0::2]
    return rotated


def rope2d_tables(coords: Coords, head_dim: int, base: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cosine/sine tables [L, head_dim] for 2D rotary embedding.

    The first half of the head dimension rotates with the row coordinate, the
    second half with the column coordinate; inside each half, consecutive pairs
    (2i, 2i + 1) rotate with frequency base^(-2i / half).
    """
    if head_dim % 4:
        raise ConfigurationError(f"2D RoPE needs head dim divisible by 4, got {head_dim}")
    positions = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    half = head_dim // 2
    inv_freq = base ** (-np.arange(0, half, 2, dtype=np.float64) / half)
    row_angles = np.repeat(positions[:, :1] * inv_freq, 2, axis=1)
    col_angles = np.repeat(positions[:, 1:] * inv_freq, 2, axis=1)
    angles = np.concatenate([row_angles, col_angles], axis=1)
    return np.cos(angles), np.sin(angles)


def rope2d(x: Tensor, coords: Coords, base: Optional[float] = None) -> Tensor:
    """
    Apply 2D rotary position embedding to per-head queries or keys.

    Args:
        x: Tensor[L, d_h] or Tensor[L, heads, d_h]
        coords: (row, col) per token, length L
        base: Frequency base; defaults to settings.rope_base

    Returns:
        Rotated tensor of the same shape; every rotated pair keeps its norm
    """
    base = settings.rope_base if base is None else base
    if x.ndim not in (2, 3):
        raise DimensionError(f"rope2d expects [L, d_h] or [L, h, d_h], got {x.shape}")
    cos, sin = rope2d_tables(coords, x.shape[-1], base)
    if cos.shape[0] != x.shape[0]:
        raise DimensionError(f"rope2d got {cos.shape[0]} coordinates for {x.shape[0]} tokens")
    cos = cos.astype(x.dtype)
    sin = sin.astype(x.dtype)
    if x.ndim == 3:
        cos = cos[:, None, :]
        sin = sin[:, None, :]
    out = Tensor._result(x.data * cos + _rotate_pairs(x.data) * sin, (x,), "rope2d")
    if out.requires_grad:
        def _backward() -> None:
            x._accumulate(out.grad * cos - _rotate_pairs(out.grad * sin))
        out._backward = _backward
    return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate tensors along ``axis``."""
    if not tensors:
        raise DimensionError("concat needs at least one tensor")
    axis = axis % tensors[0].ndim
    out = Tensor._result(
        np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), "concat"
    )
    if out.requires_grad:
        sizes = [t.shape[axis] for t in tensors]
        def _backward() -> None:
            offset = 0
            for tensor, size in zip(tensors, sizes):
                index = [slice(None)] * out.grad.ndim
                index[axis] = slice(offset, offset + size)
                tensor._accumulate(out.grad[tuple(index)])
                offset += size
        out._backward = _backward
    return out


def cross_entropy(logits: Tensor, targets: Sequence[int]) -> Tensor:
    """Mean negative log-likelihood of integer targets under softmax(logits)."""
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy expects [N, C] logits, got {logits.shape}")
    targets = np.asarray(targets, dtype=np.int64)
    n = logits.shape[0]
    if targets.shape != (n,):
        raise DimensionError(f"expected {n} targets, got {targets.shape}")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -log_probs[np.arange(n), targets].mean()
    out = Tensor._result(np.asarray(loss, dtype=logits.dtype), (logits,), "cross_entropy")
    if out.requires_grad:
        def _backward() -> None:
            grad = np.exp(log_probs)
            grad[np.arange(n), targets] -= 1.0
            logits._accumulate(grad * (out.grad / n))
        out._backward = _backward
    return out
