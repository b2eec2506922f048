# Services package

from hireslab.services.pipeline_service import PipelineWeights, encode, init_pipeline_weights

__all__ = [
    'PipelineWeights',
    'encode',
    'init_pipeline_weights',
]
