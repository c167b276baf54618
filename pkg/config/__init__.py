from .settings import config, Config, DevelopmentConfig, ProductionConfig, TestingConfig
from .pipeline import PipelineConfig, load_pipeline_config

__all__ = [
    'config',
    'Config',
    'DevelopmentConfig',
    'ProductionConfig',
    'TestingConfig',
    'PipelineConfig',
    'load_pipeline_config'
]
