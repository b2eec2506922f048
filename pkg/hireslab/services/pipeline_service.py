"""
Pipeline Service

End-to-end encoding of one image:

    lowres_view -> encoder (no adapters) -> sampler
    dynamic slices -> encoder (adapters on) -> sampler, per slice
    assemble(lowres tokens, slice tokens, separators)

Weights for every stage live in one ``PipelineWeights`` tree that is saved
and loaded through the TNSR1 manifest store.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from hireslab.config import settings
from hireslab.models.config import PipelineConfig
from hireslab.models.grid import GridSpec
from hireslab.models.image import ImageBuffer
from hireslab.models.sequence import AssembledSequence
from hireslab.numerics.params import bind_params, flatten_params
from hireslab.numerics.tensor import get_default_dtype, no_grad
from hireslab.services.assembler_service import SeparatorSet, assemble, count_tokens
from hireslab.services.sampler_service import SmsWeights, sms_forward
from hireslab.services.slice_restore_service import SraWeights
from hireslab.services.slicer_service import compute_grid, extract_slices, lowres_view, pad_to_canvas
from hireslab.services.vit_service import VitWeights, encode_views, init_vit_weights
from hireslab.utils.errors import ConfigurationError, TensorFormatError
from hireslab.utils.files import PathLike
from hireslab.utils.metrics import metrics_collector
from hireslab.utils.tensor_io import load_weight_manifest, save_weight_manifest

logger = logging.getLogger(__name__)


@dataclass
class PipelineWeights:
    vit: VitWeights
    sampler: SmsWeights
    separators: SeparatorSet
    adapters: Dict[int, SraWeights] = field(default_factory=dict)


def init_pipeline_weights(cfg: PipelineConfig, seed: Optional[int] = None) -> PipelineWeights:
    """
    Deterministic initialization from a seed.

    Adapters start as exact no-ops (host Wq/Wk/Wv copied, Wo and the
    depthwise kernel zero).
    """
    seed = settings.default_seed if seed is None else seed
    rng = np.random.default_rng(seed)
    vit = init_vit_weights(cfg.vit, rng)
    adapters = {
        layer: SraWeights.from_host(vit.layers[layer].attn, down_factor=cfg.sra.down_factor)
        for layer in cfg.vit.adapter_layers
    }
    sampler = SmsWeights.init(cfg.vit.dim, cfg.sampler, rng)
    separators = SeparatorSet.init(cfg.vit.dim, rng)
    return PipelineWeights(vit=vit, sampler=sampler, separators=separators, adapters=adapters)


def zero_adapters(weights: PipelineWeights) -> PipelineWeights:
    """Copy of the weights with every adapter's output path (Wo, depthwise kernel) zeroed."""
    leaves = {}
    for name, tensor in flatten_params(weights.adapters, "adapters").items():
        if name.endswith(".dw_kernel") or name.endswith(".global_attn.wo"):
            leaves[name] = np.zeros_like(tensor.data)
    return bind_params(weights, leaves)


def _grid_for(img: ImageBuffer, cfg: PipelineConfig) -> GridSpec:
    return compute_grid(img.height, img.width, cfg.base_resolution, cfg.max_slices)


def expected_length(img: ImageBuffer, cfg: PipelineConfig) -> int:
    """Closed-form sequence length ``encode`` produces for this image."""
    per_view = cfg.tokens_per_view
    return count_tokens(_grid_for(img, cfg), per_view, per_view, cfg.use_separators)


def encode_graph(img: ImageBuffer, cfg: PipelineConfig, weights: PipelineWeights) -> AssembledSequence:
    """``encode`` without disabling gradient tracking (used by training)."""
    img = img.to_channels(cfg.vit.channels)
    r = cfg.base_resolution
    adapters = weights.adapters if cfg.sra_enabled else None

    with metrics_collector.timed("encode.slicing"):
        grid = _grid_for(img, cfg)
        slices = extract_slices(pad_to_canvas(img, grid), grid)
        overview = lowres_view(img, r)

    with metrics_collector.timed("encode.vit"):
        lowres_features = encode_views([overview], GridSpec.single(r), weights.vit)
        slice_features = encode_views(slices, grid, weights.vit, adapters)

    with metrics_collector.timed("encode.sampler"):
        lowres_tokens = sms_forward(lowres_features[0], weights.sampler)
        slice_tokens = [sms_forward(feature, weights.sampler) for feature in slice_features]

    sequence = assemble(lowres_tokens, slice_tokens, grid, weights.separators, cfg.use_separators)
    logger.debug(
        f"Image encoded | Size: {img.height}x{img.width} | Grid: {grid.m}x{grid.n} | "
        f"Tokens: {sequence.length}"
    )
    return sequence


def encode(img: ImageBuffer, cfg: PipelineConfig, weights: PipelineWeights) -> AssembledSequence:
    """
    Encode an image into the assembled visual token sequence.

    Pure in (image, weights, config); runs without gradient tracking.
    """
    with no_grad():
        return encode_graph(img, cfg, weights)


def save_pipeline(directory: PathLike, cfg: PipelineConfig, weights: PipelineWeights) -> None:
    """Write every weight tensor plus the config into a manifest directory."""
    save_weight_manifest(
        directory,
        flatten_params(weights),
        metadata={"config": cfg.model_dump(mode="json")},
    )


def load_pipeline(
    directory: PathLike,
    cfg: Optional[PipelineConfig] = None,
) -> Tuple[PipelineConfig, PipelineWeights]:
    """
    Load weights written by ``save_pipeline``.

    The config stored in the manifest is used unless one is given.

    Raises:
        TensorFormatError: If tensors are missing or unexpected
        ConfigurationError: If no config is available
    """
    arrays, metadata = load_weight_manifest(directory)
    if cfg is None:
        if "config" not in metadata:
            raise ConfigurationError(f"manifest in {directory} carries no pipeline config")
        cfg = PipelineConfig.model_validate(metadata["config"])
    template = init_pipeline_weights(cfg, seed=0)
    names = set(flatten_params(template))
    missing = sorted(names - set(arrays))
    extra = sorted(set(arrays) - names)
    if missing or extra:
        raise TensorFormatError(f"weight names do not match config (missing: {missing[:3]}, extra: {extra[:3]})")
    dtype = get_default_dtype()
    weights = bind_params(template, {name: array.astype(dtype) for name, array in arrays.items()})
    return cfg, weights
