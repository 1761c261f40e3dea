"""Streaming WAIC: constant-memory lppd and p_WAIC from MCMC output."""

from .accumulators import (LogSumExpState, WelfordState, lse_finalize, lse_init, lse_update,
                           lse_update_block, welford_finalize, welford_init, welford_update)
from .config import CHECKPOINT_FRACTIONS, TOLERANCES
from .engine import (WaicEngine, WaicResult, WaicState, checkpoint_load, checkpoint_save,
                     waic_finalize, waic_init, waic_update)
from .estimators import OfflineWAIC, OnlineWAIC, PredictiveDensityTransformer
from .exceptions import (
    WaicError, DomainError, InsufficientSamplesError, IntegrityError, NumericalError,
    CorruptCheckpointError, PartitionError, DuplicateNodeError, IncompletePartitionError,
    UnknownNodeError, MissingParameterError, ModelConfigurationError, StreamFormatError,
)
from .harness import StudyConfig, StudyReport, Variant, emit_report, load_study_config, preset, run_study
from .model import ModelGraph, Node, log_joint_density, pointwise_log_density, simulate_latent
from .models import build_model
from .oracle import offline_waic
from .partition import PartitionSpec, build_partition, consecutive_blocks, group_by, load_partition
from .predictive import CONDITIONAL, MARGINAL, PredictiveConfig, conditional_h, marginal_h
from .samplers import McmcConfig, run_mcmc_waic
from .stream import ingest_stream, resume_stream

__version__ = "0.1.0"
