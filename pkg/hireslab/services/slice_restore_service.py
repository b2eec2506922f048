"""
SliceRestore Adapter Service

Merges per-slice feature maps into the whole-image map, fuses local detail
(depthwise 3x3 convolution) with global context (downsample, self-attention
with 2D RoPE, upsample), and cuts the result back into slices. Attached as a
residual branch inside selected ViT layers.

Whole-map orientation: rows = m * H_t, cols = n * W_t.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from hireslab.config import settings
from hireslab.models.features import FeatureMap, grid_coords
from hireslab.models.grid import GridSpec
from hireslab.numerics.attention import mhsa
from hireslab.numerics.ops import concat, depthwise_conv3x3, layer_norm, resize_bilinear
from hireslab.numerics.params import INIT_STD, AttentionWeights, LayerNormWeights, gaussian, zeros
from hireslab.numerics.tensor import Tensor
from hireslab.utils.errors import DimensionError, PreconditionError

logger = logging.getLogger(__name__)


@dataclass
class SraWeights:
    """
    Adapter parameters.

    Attributes:
        dw_kernel: Depthwise kernel [3, 3, D] of the local path
        norm: Layer norm applied before the global attention
        global_attn: Global-path attention (2D RoPE on by default)
        down_factor: Spatial downsample ratio of the global path
    """

    dw_kernel: Tensor
    norm: LayerNormWeights
    global_attn: AttentionWeights
    down_factor: int = 2

    def __post_init__(self):
        dim = self.global_attn.dim
        if self.dw_kernel.shape != (3, 3, dim):
            raise DimensionError(f"dw_kernel must be [3, 3, {dim}], got {self.dw_kernel.shape}")
        if self.down_factor < 1:
            raise PreconditionError(f"down_factor must be positive, got {self.down_factor}")

    @property
    def dim(self) -> int:
        return self.global_attn.dim

    @classmethod
    def from_host(
        cls,
        host: AttentionWeights,
        down_factor: int = 2,
        rope_base: Optional[float] = None,
    ) -> "SraWeights":
        """
        No-op initialization: Wq/Wk/Wv copied from the host layer, Wo and the
        depthwise kernel zero, so the adapter output is exactly zero.
        """
        dim = host.dim
        attn = AttentionWeights(
            wq=Tensor(host.wq.data.copy()),
            wk=Tensor(host.wk.data.copy()),
            wv=Tensor(host.wv.data.copy()),
            wo=zeros((dim, dim)),
            heads=host.heads,
            use_rope2d=True,
            rope_base=settings.rope_base if rope_base is None else rope_base,
        )
        return cls(
            dw_kernel=zeros((3, 3, dim)),
            norm=LayerNormWeights.init(dim),
            global_attn=attn,
            down_factor=down_factor,
        )

    @classmethod
    def init(
        cls,
        dim: int,
        heads: int,
        rng: np.random.Generator,
        down_factor: int = 2,
        use_rope2d: bool = True,
        std: float = INIT_STD,
    ) -> "SraWeights":
        """Random initialization with both paths active."""
        return cls(
            dw_kernel=gaussian((3, 3, dim), rng, std),
            norm=LayerNormWeights.init(dim),
            global_attn=AttentionWeights.init(
                dim, heads, rng, use_rope2d=use_rope2d, rope_base=settings.rope_base, std=std
            ),
            down_factor=down_factor,
        )


def _slice_shape(slices: List[FeatureMap], grid: GridSpec) -> Tuple[int, int]:
    if len(slices) != grid.num_slices:
        raise DimensionError(f"expected {grid.num_slices} slices for a {grid.m}x{grid.n} grid, got {len(slices)}")
    spatial = slices[0].spatial
    for feature in slices[1:]:
        if feature.spatial != spatial or feature.dim != slices[0].dim:
            raise DimensionError(
                f"slice shapes differ: {feature.spatial}x{feature.dim} vs {spatial}x{slices[0].dim}"
            )
    return spatial


def merge(slices: List[FeatureMap], grid: GridSpec) -> Tensor:
    """
    Place slice k = (row, col) at block rows [row*H_t, (row+1)*H_t) and
    cols [col*W_t, (col+1)*W_t) of the whole map.

    Returns:
        Tensor[m * H_t, n * W_t, D]
    """
    _slice_shape(slices, grid)
    rows = [
        concat([slices[row * grid.n + col].as_grid() for col in range(grid.n)], axis=1)
        for row in range(grid.m)
    ]
    return concat(rows, axis=0)


def reslice(whole: Tensor, grid: GridSpec, spatial: Tuple[int, int]) -> List[FeatureMap]:
    """Exact inverse of ``merge``'s index map."""
    h_t, w_t = spatial
    if whole.ndim != 3 or whole.shape[:2] != (grid.m * h_t, grid.n * w_t):
        raise DimensionError(
            f"whole map {whole.shape} does not match a {grid.m}x{grid.n} grid of {h_t}x{w_t} slices"
        )
    return [
        FeatureMap.from_grid(whole[row * h_t:(row + 1) * h_t, col * w_t:(col + 1) * w_t, :])
        for row in range(grid.m)
        for col in range(grid.n)
    ]


def local_fuse(whole: Tensor, kernel: Tensor) -> Tensor:
    return depthwise_conv3x3(whole, kernel)


def global_fuse(whole: Tensor, w: SraWeights) -> Tensor:
    """
    Downsample by ``down_factor``, attend over all tokens, upsample back.

    Raises:
        PreconditionError: If down_factor does not divide the map size
    """
    height, width, dim = whole.shape
    factor = w.down_factor
    if height % factor or width % factor:
        raise PreconditionError(f"down_factor {factor} must divide whole map {height}x{width}")
    small_h, small_w = height // factor, width // factor
    down = resize_bilinear(whole, small_h, small_w) if factor > 1 else whole
    tokens = layer_norm(down.reshape(small_h * small_w, dim), w.norm.gamma, w.norm.beta)
    coords = grid_coords(small_h, small_w) if w.global_attn.use_rope2d else None
    attended = mhsa(tokens, w.global_attn, coords=coords).reshape(small_h, small_w, dim)
    return resize_bilinear(attended, height, width) if factor > 1 else attended


def capture(whole: Tensor, w: SraWeights) -> Tensor:
    """Elementwise sum of the local and global fusion paths."""
    return local_fuse(whole, w.dw_kernel) + global_fuse(whole, w)


def sra_forward(slices: List[FeatureMap], grid: GridSpec, w: SraWeights) -> List[FeatureMap]:
    """reslice(capture(merge(slices)))"""
    spatial = _slice_shape(slices, grid)
    restored = reslice(capture(merge(slices, grid), w), grid, spatial)
    logger.debug(
        f"Adapter applied | Grid: {grid.m}x{grid.n} | Slice tokens: {spatial[0]}x{spatial[1]}"
    )
    return restored
