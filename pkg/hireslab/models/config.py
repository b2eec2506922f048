"""
Architecture configuration models (serialized as JSON next to weights).
"""
from typing import List, Literal

from pydantic import BaseModel, Field, field_validator, model_validator


class VitConfig(BaseModel):
    """
    Tiny ViT encoder configuration.

    Defaults scale a 224px / patch-14 / adapters-in-layers-19..22 encoder down
    by 8x while keeping every shape relationship.
    """

    input_size: int = Field(default=28, ge=1, description="Slice side r in pixels")
    patch_size: int = Field(default=7, ge=1, description="Patch side p in pixels (p | r)")
    dim: int = Field(default=32, ge=1)
    depth: int = Field(default=4, ge=1)
    heads: int = Field(default=4, ge=1)
    adapter_layers: List[int] = Field(default_factory=lambda: [2, 3])
    mlp_ratio: float = Field(default=4.0, gt=0)
    channels: int = Field(default=3)

    @field_validator("channels")
    @classmethod
    def validate_channels(cls, v: int) -> int:
        if v not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {v}")
        return v

    @field_validator("adapter_layers")
    @classmethod
    def normalize_adapter_layers(cls, v: List[int]) -> List[int]:
        return sorted(set(v))

    @model_validator(mode="after")
    def check_shapes(self) -> "VitConfig":
        if self.input_size % self.patch_size:
            raise ValueError(f"patch_size {self.patch_size} must divide input_size {self.input_size}")
        if self.dim % self.heads:
            raise ValueError(f"heads {self.heads} must divide dim {self.dim}")
        bad = [layer for layer in self.adapter_layers if not 0 <= layer < self.depth]
        if bad:
            raise ValueError(f"adapter layers {bad} outside [0, {self.depth})")
        return self

    @property
    def grid_side(self) -> int:
        """Tokens per side of a slice (r / p)."""
        return self.input_size // self.patch_size

    @property
    def num_tokens(self) -> int:
        return self.grid_side ** 2

    @property
    def mlp_hidden(self) -> int:
        return max(1, int(round(self.dim * self.mlp_ratio)))


class SraConfig(BaseModel):
    """SliceRestore adapter configuration."""

    down_factor: int = Field(default=2, ge=1, description="Spatial downsample ratio of the global path")


class SamplerConfig(BaseModel):
    """Self-mining sampler configuration."""

    pool_size: int = Field(default=2, ge=1, description="Average-pool kernel S")
    heads: int = Field(default=4, ge=1)
    ffn_ratio: float = Field(default=4.0, gt=0)
    mode: Literal["sms", "pool"] = Field(
        default="sms", description="'sms' = pooled queries + cross-attention; 'pool' = pooling only"
    )


class PipelineConfig(BaseModel):
    """End-to-end encoder configuration."""

    vit: VitConfig = Field(default_factory=VitConfig)
    sra: SraConfig = Field(default_factory=SraConfig)
    sampler: SamplerConfig = Field(default_factory=SamplerConfig)
    base_resolution: int = Field(default=28, ge=1, description="r; must equal vit.input_size")
    max_slices: int = Field(default=16, ge=1, description="Slice cap M")
    use_separators: bool = True
    sra_enabled: bool = True

    @model_validator(mode="after")
    def check_consistency(self) -> "PipelineConfig":
        if self.base_resolution != self.vit.input_size:
            raise ValueError(
                f"base_resolution {self.base_resolution} must equal vit.input_size {self.vit.input_size}"
            )
        side = self.vit.grid_side
        if side % self.sampler.pool_size:
            raise ValueError(f"pool size {self.sampler.pool_size} must divide token grid side {side}")
        if side % self.sra.down_factor:
            raise ValueError(f"down_factor {self.sra.down_factor} must divide token grid side {side}")
        if self.vit.dim % self.sampler.heads:
            raise ValueError(f"sampler heads {self.sampler.heads} must divide dim {self.vit.dim}")
        if self.vit.adapter_layers and self.sra_enabled and (self.vit.dim // self.vit.heads) % 4:
            raise ValueError("2D RoPE in the adapter needs a head dim divisible by 4")
        return self

    @property
    def tokens_per_view(self) -> int:
        return (self.vit.grid_side // self.sampler.pool_size) ** 2

    @classmethod
    def toy(cls, max_slices: int = 4) -> "PipelineConfig":
        """Desk-scale configuration used by the toy training loop (r = 28, M = 4)."""
        return cls(max_slices=max_slices)
