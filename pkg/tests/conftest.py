"""
Pytest configuration and fixtures for testing.
"""
import numpy as np
import pytest

from hireslab.models.config import PipelineConfig, SamplerConfig, VitConfig
from hireslab.numerics.tensor import precision
from hireslab.utils.metrics import metrics_collector


@pytest.fixture(autouse=True)
def double_precision():
    """Run every test with float64 as the default tensor dtype."""
    with precision("float64"):
        yield


@pytest.fixture(autouse=True)
def clean_metrics():
    """Start each test with an empty metrics collector."""
    metrics_collector.reset_metrics()
    yield
    metrics_collector.reset_metrics()


@pytest.fixture(scope="function")
def rng():
    """Seeded generator for reproducible random inputs."""
    return np.random.default_rng(1234)


@pytest.fixture(scope="function")
def small_vit_config():
    """Depth-2, D=8 encoder on 8x8 inputs with 4x4 patches (2x2 token grid)."""
    return VitConfig(input_size=8, patch_size=4, dim=8, depth=2, heads=2, adapter_layers=[1], mlp_ratio=2.0)


@pytest.fixture(scope="function")
def small_pipeline_config(small_vit_config):
    """Pipeline on 8px slices, 4 slices max, S=2 sampler (one token per view)."""
    return PipelineConfig(
        vit=small_vit_config,
        sampler=SamplerConfig(pool_size=2, heads=2, ffn_ratio=2.0),
        base_resolution=8,
        max_slices=4,
    )


@pytest.fixture(scope="function")
def toy_config():
    """Desk-scale toy configuration (r = 28, M = 4)."""
    return PipelineConfig.toy()
