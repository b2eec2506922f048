"""
Configuration management for hireslab.
Loads environment variables and provides typed configuration objects.
"""
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=False,
        populate_by_name=True,
        extra="ignore",
    )

    # Application
    app_name: str = Field(default="hireslab", alias="APP_NAME")
    log_level: str = Field(default="INFO", alias="LOG_LEVEL")
    debug: bool = Field(default=False, alias="DEBUG")

    # Determinism and execution
    default_seed: int = Field(default=0, alias="HIRES_SEED")
    default_dtype: str = Field(default="float32", alias="HIRES_DTYPE")
    threads: int = Field(default=1, ge=1, alias="HIRES_THREADS")

    # Slicing
    base_resolution: int = Field(default=224, ge=1, alias="HIRES_BASE_RESOLUTION")
    max_slices: int = Field(default=16, ge=1, alias="HIRES_MAX_SLICES")

    # Numerics
    rope_base: float = Field(default=10000.0, gt=0, alias="HIRES_ROPE_BASE")
    layer_norm_eps: float = Field(default=1e-6, gt=0, alias="HIRES_LAYER_NORM_EPS")
    gradcheck_eps: float = Field(default=1e-5, gt=0, alias="HIRES_GRADCHECK_EPS")

    # Benchmark generation
    render_retries: int = Field(default=32, ge=1, alias="HIRES_RENDER_RETRIES")


# Global settings instance
settings = Settings()
