"""
Parameter containers and helpers for walking weight trees.

Weight trees are dataclasses whose fields are Tensors, nested weight
dataclasses, lists or dicts of them. ``flatten_params`` names every tensor
leaf with a dotted path; ``bind_params`` rebuilds a tree with replacement
leaves, which is how weights are loaded and how gradient checks feed
perturbed parameters through a module.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np

from hireslab.numerics.tensor import Tensor, get_default_dtype
from hireslab.utils.errors import ConfigurationError, DimensionError

INIT_STD = 0.02


def gaussian(shape, rng: np.random.Generator, std: float = INIT_STD, name: Optional[str] = None) -> Tensor:
    """Gaussian(0, std) tensor in the current default precision."""
    return Tensor(rng.normal(0.0, std, size=shape).astype(get_default_dtype()), name=name)


def zeros(shape, name: Optional[str] = None) -> Tensor:
    return Tensor(np.zeros(shape, dtype=get_default_dtype()), name=name)


def ones(shape, name: Optional[str] = None) -> Tensor:
    return Tensor(np.ones(shape, dtype=get_default_dtype()), name=name)


@dataclass
class LinearWeights:
    """Affine map parameters: weight [D_in x D_out], bias [D_out]."""

    weight: Tensor
    bias: Tensor

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise DimensionError(
                f"linear weight {self.weight.shape} and bias {self.bias.shape} are inconsistent"
            )

    @classmethod
    def init(cls, d_in: int, d_out: int, rng: np.random.Generator, std: float = INIT_STD) -> "LinearWeights":
        return cls(weight=gaussian((d_in, d_out), rng, std), bias=zeros((d_out,)))


@dataclass
class LayerNormWeights:
    gamma: Tensor
    beta: Tensor

    @classmethod
    def init(cls, dim: int) -> "LayerNormWeights":
        return cls(gamma=ones((dim,)), beta=zeros((dim,)))


@dataclass
class AttentionWeights:
    """
    Multi-head attention projections (row-vector convention: y = x @ W).

    Attributes:
        wq, wk, wv, wo: [D x D] projections
        heads: Number of heads h, with h | D
        use_rope2d: Rotate queries and keys with 2D RoPE before scoring
        rope_base: RoPE frequency base
    """

    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    heads: int
    use_rope2d: bool = False
    rope_base: float = 10000.0

    def __post_init__(self):
        dim = self.wq.shape[0]
        for name in ("wq", "wk", "wv", "wo"):
            if getattr(self, name).shape != (dim, dim):
                raise DimensionError(f"attention {name} must be [{dim} x {dim}]")
        if self.heads < 1 or dim % self.heads:
            raise ConfigurationError(f"heads={self.heads} must divide dim={dim}")
        if self.use_rope2d and (dim // self.heads) % 4:
            raise ConfigurationError(
                f"2D RoPE needs head dim divisible by 4, got {dim // self.heads}"
            )

    @property
    def dim(self) -> int:
        return self.wq.shape[0]

    @classmethod
    def init(
        cls,
        dim: int,
        heads: int,
        rng: np.random.Generator,
        use_rope2d: bool = False,
        rope_base: float = 10000.0,
        std: float = INIT_STD,
    ) -> "AttentionWeights":
        return cls(
            wq=gaussian((dim, dim), rng, std),
            wk=gaussian((dim, dim), rng, std),
            wv=gaussian((dim, dim), rng, std),
            wo=gaussian((dim, dim), rng, std),
            heads=heads,
            use_rope2d=use_rope2d,
            rope_base=rope_base,
        )


def _children(obj: Any):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        for field in dataclasses.fields(obj):
            yield field.name, getattr(obj, field.name)
    elif isinstance(obj, (list, tuple)):
        for index, value in enumerate(obj):
            yield str(index), value
    elif isinstance(obj, dict):
        for key in sorted(obj, key=str):
            yield str(key), obj[key]


def flatten_params(obj: Any, prefix: str = "") -> Dict[str, Tensor]:
    """
    Collect every Tensor leaf of a weight tree under a dotted name.

    Returns:
        Ordered dict of name -> Tensor (deterministic order)
    """
    if isinstance(obj, Tensor):
        return {prefix: obj}
    named: Dict[str, Tensor] = {}
    for key, value in _children(obj):
        path = f"{prefix}.{key}" if prefix else key
        named.update(flatten_params(value, path))
    return named


def bind_params(obj: Any, leaves: Mapping[str, Union[Tensor, np.ndarray]], prefix: str = "") -> Any:
    """
    Return a copy of a weight tree with leaves replaced by name.

    Names missing from ``leaves`` keep their current tensor.

    Raises:
        DimensionError: If a replacement has a different shape
    """
    if isinstance(obj, Tensor):
        if prefix not in leaves:
            return obj
        replacement = leaves[prefix]
        if not isinstance(replacement, Tensor):
            replacement = Tensor(np.asarray(replacement), name=prefix)
        if replacement.shape != obj.shape:
            raise DimensionError(
                f"parameter {prefix} has shape {replacement.shape}, expected {obj.shape}"
            )
        return replacement
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        updates = {}
        for field in dataclasses.fields(obj):
            path = f"{prefix}.{field.name}" if prefix else field.name
            updates[field.name] = bind_params(getattr(obj, field.name), leaves, path)
        return dataclasses.replace(obj, **updates)
    if isinstance(obj, list):
        return [bind_params(v, leaves, f"{prefix}.{i}" if prefix else str(i)) for i, v in enumerate(obj)]
    if isinstance(obj, tuple):
        return tuple(bind_params(v, leaves, f"{prefix}.{i}" if prefix else str(i)) for i, v in enumerate(obj))
    if isinstance(obj, dict):
        return {k: bind_params(v, leaves, f"{prefix}.{k}" if prefix else str(k)) for k, v in obj.items()}
    return obj


def parameters(obj: Any) -> List[Tensor]:
    return list(flatten_params(obj).values())


def set_requires_grad(obj: Any, flag: bool) -> None:
    for tensor in parameters(obj):
        tensor.requires_grad = flag
        tensor.grad = None
