"""
ViT Encoder Service

A tiny vision transformer: patch embedding (no class token) followed by
pre-norm attention/MLP blocks. Selected layers host a SliceRestore adapter
that reads the same normalized input as the attention sublayer and adds its
output as a parallel residual:

    h = LN1(x)
    x = x + Attn(h) [+ SRA(h over all slices)]
    x = x + MLP(LN2(x))
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional

import numpy as np

from hireslab.models.config import VitConfig
from hireslab.models.features import FeatureMap
from hireslab.models.grid import GridSpec
from hireslab.models.image import ImageBuffer
from hireslab.numerics.attention import mhsa
from hireslab.numerics.ops import gelu, layer_norm, linear
from hireslab.numerics.params import INIT_STD, AttentionWeights, LayerNormWeights, LinearWeights, gaussian
from hireslab.numerics.tensor import Tensor
from hireslab.services.slice_restore_service import SraWeights, sra_forward
from hireslab.utils.errors import ConfigurationError, DimensionError

logger = logging.getLogger(__name__)


@dataclass
class VitLayerWeights:
    ln1: LayerNormWeights
    attn: AttentionWeights
    ln2: LayerNormWeights
    fc1: LinearWeights
    fc2: LinearWeights


@dataclass
class VitWeights:
    """
    Encoder parameters.

    Attributes:
        patch: Projection [p*p*C x D] of flattened (py, px, c) patches
        pos_embed: Learned positional embedding [L x D], L = (r/p)^2
        layers: Per-layer block weights
        input_size: r
        patch_size: p
    """

    patch: LinearWeights
    pos_embed: Tensor
    layers: List[VitLayerWeights]
    input_size: int
    patch_size: int

    def __post_init__(self):
        side = self.input_size // self.patch_size
        dim = self.patch.weight.shape[1]
        if self.pos_embed.shape != (side * side, dim):
            raise DimensionError(
                f"pos_embed must be [{side * side} x {dim}], got {self.pos_embed.shape}"
            )

    @property
    def dim(self) -> int:
        return self.patch.weight.shape[1]

    @property
    def channels(self) -> int:
        return self.patch.weight.shape[0] // (self.patch_size * self.patch_size)

    @property
    def grid_side(self) -> int:
        return self.input_size // self.patch_size


def init_vit_weights(cfg: VitConfig, rng: np.random.Generator, std: float = INIT_STD) -> VitWeights:
    """Gaussian(0, std) projections, ones/zeros for layer norms."""
    patch_dim = cfg.patch_size * cfg.patch_size * cfg.channels
    layers = [
        VitLayerWeights(
            ln1=LayerNormWeights.init(cfg.dim),
            attn=AttentionWeights.init(cfg.dim, cfg.heads, rng, std=std),
            ln2=LayerNormWeights.init(cfg.dim),
            fc1=LinearWeights.init(cfg.dim, cfg.mlp_hidden, rng, std),
            fc2=LinearWeights.init(cfg.mlp_hidden, cfg.dim, rng, std),
        )
        for _ in range(cfg.depth)
    ]
    return VitWeights(
        patch=LinearWeights.init(patch_dim, cfg.dim, rng, std),
        pos_embed=gaussian((cfg.num_tokens, cfg.dim), rng, std),
        layers=layers,
        input_size=cfg.input_size,
        patch_size=cfg.patch_size,
    )


def patchify(img: ImageBuffer, patch_size: int) -> np.ndarray:
    """Non-overlapping patches flattened in (py, px, c) order, row-major over the patch grid."""
    side = img.height // patch_size
    c = img.channels
    blocks = img.data.reshape(side, patch_size, side, patch_size, c).transpose(0, 2, 1, 3, 4)
    return blocks.reshape(side * side, patch_size * patch_size * c)


def patch_embed(img: ImageBuffer, w: VitWeights) -> FeatureMap:
    """
    Project patches and add the positional embedding.

    Raises:
        DimensionError: If the image is not r x r with the encoder's channel count
    """
    if (img.height, img.width) != (w.input_size, w.input_size):
        raise DimensionError(
            f"encoder expects {w.input_size}x{w.input_size} input, got {img.height}x{img.width}"
        )
    if img.channels != w.channels:
        raise DimensionError(f"encoder expects {w.channels} channels, got {img.channels}")
    patches = Tensor(patchify(img, w.patch_size), dtype=w.patch.weight.dtype)
    tokens = linear(patches, w.patch.weight, w.patch.bias) + w.pos_embed
    return FeatureMap(tokens=tokens, spatial=(w.grid_side, w.grid_side))


def mlp(x: Tensor, layer: VitLayerWeights) -> Tensor:
    hidden = gelu(linear(x, layer.fc1.weight, layer.fc1.bias))
    return linear(hidden, layer.fc2.weight, layer.fc2.bias)


def encoder_forward(
    slices: List[FeatureMap],
    grid: GridSpec,
    w: VitWeights,
    adapters: Optional[Mapping[int, SraWeights]] = None,
) -> List[FeatureMap]:
    """
    Run the shared encoder over every slice.

    Without adapters each slice is processed independently. At an adapter
    layer the adapter consumes the normalized input of all slices jointly.

    Args:
        slices: Per-slice feature maps (same spatial shape)
        grid: Slicing grid the slices come from (1x1 for the low-res view)
        w: Encoder weights
        adapters: Optional layer index -> SraWeights

    Raises:
        DimensionError: On inconsistent slice shapes or counts
        ConfigurationError: On adapter indices outside [0, depth)
    """
    if not slices:
        raise DimensionError("encoder_forward needs at least one slice")
    spatial = slices[0].spatial
    for feature in slices:
        if feature.spatial != spatial or feature.dim != w.dim:
            raise DimensionError(
                f"slice {feature.spatial}x{feature.dim} does not match {spatial}x{w.dim}"
            )
    adapters = dict(adapters or {})
    bad = [index for index in adapters if not 0 <= index < len(w.layers)]
    if bad:
        raise ConfigurationError(f"adapter layers {bad} outside [0, {len(w.layers)})")
    if adapters and len(slices) != grid.num_slices:
        raise DimensionError(f"expected {grid.num_slices} slices, got {len(slices)}")

    xs = [feature.tokens for feature in slices]
    for index, layer in enumerate(w.layers):
        normed = [layer_norm(x, layer.ln1.gamma, layer.ln1.beta) for x in xs]
        xs = [x + mhsa(h, layer.attn) for x, h in zip(xs, normed)]
        if index in adapters:
            restored = sra_forward(
                [FeatureMap(tokens=h, spatial=spatial) for h in normed], grid, adapters[index]
            )
            xs = [x + r.tokens for x, r in zip(xs, restored)]
        xs = [x + mlp(layer_norm(x, layer.ln2.gamma, layer.ln2.beta), layer) for x in xs]
    return [FeatureMap(tokens=x, spatial=spatial) for x in xs]


def encode_views(
    views: List[ImageBuffer],
    grid: GridSpec,
    w: VitWeights,
    adapters: Optional[Dict[int, SraWeights]] = None,
) -> List[FeatureMap]:
    """Patch-embed r x r views and run the encoder over them."""
    return encoder_forward([patch_embed(view, w) for view in views], grid, w, adapters)
