"""
Minimal dense-tensor engine: Tensor with reverse-mode autograd, primitive ops,
attention, and finite-difference gradient verification.
"""
from hireslab.numerics.attention import cross_attention, mhsa
from hireslab.numerics.gradcheck import GradResult, grad_check, grad_check_report, value_and_grad
from hireslab.numerics.ops import (
    avg_pool2d,
    concat,
    cross_entropy,
    depthwise_conv3x3,
    gelu,
    layer_norm,
    linear,
    matmul,
    resize_bilinear,
    rope2d,
    softmax_rows,
)
from hireslab.numerics.params import AttentionWeights, LayerNormWeights, LinearWeights
from hireslab.numerics.tensor import Tensor, enable_grad, get_default_dtype, no_grad, precision

__all__ = [
    "AttentionWeights",
    "GradResult",
    "LayerNormWeights",
    "LinearWeights",
    "Tensor",
    "avg_pool2d",
    "concat",
    "cross_attention",
    "cross_entropy",
    "depthwise_conv3x3",
    "enable_grad",
    "gelu",
    "get_default_dtype",
    "grad_check",
    "grad_check_report",
    "layer_norm",
    "linear",
    "matmul",
    "mhsa",
    "no_grad",
    "precision",
    "resize_bilinear",
    "rope2d",
    "softmax_rows",
    "value_and_grad",
]
