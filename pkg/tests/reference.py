"""
Plain numpy re-implementations used as oracles in the tests.

Nothing here touches Tensor or the autograd graph: every function takes and
returns numpy arrays and is written with explicit loops where that keeps the
index arithmetic obvious.
"""
import math

import numpy as np

from hireslab.config import settings


def layer_norm(x, gamma, beta):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + settings.layer_norm_eps) * gamma + beta


def gelu(x):
    return 0.5 * x * (1.0 + np.tanh(math.sqrt(2.0 / math.pi) * (x + 0.044715 * x ** 3)))


def softmax(scores):
    exps = np.exp(scores - scores.max(axis=-1, keepdims=True))
    return exps / exps.sum(axis=-1, keepdims=True)


def rope(x, coords, base):
    """Rotate [L, d_h] rows: first half by row coordinate, second half by column."""
    out = x.copy()
    half = x.shape[1] // 2
    for t, (row, col) in enumerate(coords):
        for offset, position in ((0, row), (half, col)):
            for i in range(0, half, 2):
                theta = position * base ** (-i / half)
                a, b = x[t, offset + i], x[t, offset + i + 1]
                out[t, offset + i] = a * math.cos(theta) - b * math.sin(theta)
                out[t, offset + i + 1] = b * math.cos(theta) + a * math.sin(theta)
    return out


def attention(xq, xkv, w, q_coords=None, k_coords=None):
    """Multi-head attention with explicit per-head Q, K, V and score matrices."""
    dim = w.wq.data.shape[0]
    head_dim = dim // w.heads
    q = xq @ w.wq.data
    k = xkv @ w.wk.data
    v = xkv @ w.wv.data
    heads = []
    for h in range(w.heads):
        cols = slice(h * head_dim, (h + 1) * head_dim)
        qh, kh, vh = q[:, cols], k[:, cols], v[:, cols]
        if w.use_rope2d:
            qh = rope(qh, q_coords, w.rope_base)
            kh = rope(kh, k_coords, w.rope_base)
        probs = softmax(qh @ kh.T / math.sqrt(head_dim))
        heads.append(probs @ vh)
    return np.concatenate(heads, axis=1) @ w.wo.data


def depthwise_conv(f, kernel):
    height, width, channels = f.shape
    out = np.zeros_like(f)
    for i in range(height):
        for j in range(width):
            for c in range(channels):
                for a in range(3):
                    for b in range(3):
                        ii, jj = i + a - 1, j + b - 1
                        if 0 <= ii < height and 0 <= jj < width:
                            out[i, j, c] += f[ii, jj, c] * kernel[a, b, c]
    return out


def _lerp_weights(n_in, n_out):
    weights = np.zeros((n_out, n_in))
    for i in range(n_out):
        src = min(max((i + 0.5) * n_in / n_out - 0.5, 0.0), n_in - 1)
        lo = int(math.floor(src))
        hi = min(lo + 1, n_in - 1)
        weights[i, lo] += 1.0 - (src - lo)
        weights[i, hi] += src - lo
    return weights


def resize(f, height, width):
    rows = _lerp_weights(f.shape[0], height)
    cols = _lerp_weights(f.shape[1], width)
    return np.einsum("ia,jb,abd->ijd", rows, cols, f)


def block_mean(grid, size):
    height, width, dim = grid.shape
    out = np.zeros((height // size, width // size, dim))
    for i in range(height // size):
        for j in range(width // size):
            out[i, j] = grid[i * size:(i + 1) * size, j * size:(j + 1) * size].mean(axis=(0, 1))
    return out


def global_fuse(whole, w):
    height, width, dim = whole.shape
    small_h, small_w = height // w.down_factor, width // w.down_factor
    down = resize(whole, small_h, small_w)
    tokens = layer_norm(down.reshape(-1, dim), w.norm.gamma.data, w.norm.beta.data)
    coords = [(row, col) for row in range(small_h) for col in range(small_w)]
    attended = attention(tokens, tokens, w.global_attn, coords, coords)
    return resize(attended.reshape(small_h, small_w, dim), height, width)


def capture(whole, w):
    return depthwise_conv(whole, w.dw_kernel.data) + global_fuse(whole, w)


def sampler(tokens, spatial, w):
    """Pooled queries, cross-attention shortcut, pre-norm FFN shortcut, output norm."""
    def norm(x, weights):
        return layer_norm(x, weights.gamma.data, weights.beta.data)

    dim = tokens.shape[1]
    q0 = block_mean(tokens.reshape(spatial[0], spatial[1], dim), w.pool_size).reshape(-1, dim)
    q1 = q0 + attention(norm(q0, w.q_norm), norm(tokens, w.kv_norm), w.cross)
    hidden = gelu(norm(q1, w.ffn_norm) @ w.ffn_in.weight.data + w.ffn_in.bias.data)
    q2 = q1 + hidden @ w.ffn_out.weight.data + w.ffn_out.bias.data
    return norm(q2, w.out_norm)
