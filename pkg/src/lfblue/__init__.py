"""Limited-feedback power allocation for distributed BLUE estimation."""

from .allocator import AllocationResult, find_k1, optimal_gains, optimal_gains_batch, rho
from .channel import FadingModel, NetworkModel, sample_distances, sample_fading, sample_network
from .codebook import (
    Codebook,
    TrainingSample,
    TrainingSet,
    codebook_distortion,
    codeword_distortion,
    load_codebook,
    save_codebook,
    select_index,
    train,
)
from .estimator import AllSilentError, blue_estimate, blue_variance, simulate_measurement
from .harness import ExperimentConfig, ResultRecord, run_experiment
from .model import ChannelRealization, NetworkParams, compute_snrs, db_to_linear, dbm_to_watts

__version__ = "0.1.0"

__all__ = [
    "AllocationResult",
    "find_k1",
    "optimal_gains",
    "optimal_gains_batch",
    "rho",
    "FadingModel",
    "NetworkModel",
    "sample_distances",
    "sample_fading",
    "sample_network",
    "Codebook",
    "TrainingSample",
    "TrainingSet",
    "codebook_distortion",
    "codeword_distortion",
    "load_codebook",
    "save_codebook",
    "select_index",
    "train",
    "AllSilentError",
    "blue_estimate",
    "blue_variance",
    "simulate_measurement",
    "ExperimentConfig",
    "ResultRecord",
    "run_experiment",
    "ChannelRealization",
    "NetworkParams",
    "compute_snrs",
    "db_to_linear",
    "dbm_to_watts",
]
