"""Core subpackage for Action Proposals - business logic."""

from .errors import InputError, InvariantError, OracleLimitError, ProposalError, StageError
from .config import PipelineConfig, load_config
from .profiles import PipelineProfile, PIPELINE_PROFILES
from .pipeline import ProposalPipeline, PipelineResult, run_pipeline

__all__ = ['InputError', 'InvariantError', 'OracleLimitError', 'ProposalError', 'StageError',
           'PipelineConfig', 'load_config', 'PipelineProfile', 'PIPELINE_PROFILES',
           'ProposalPipeline', 'PipelineResult', 'run_pipeline']
