"""Momentum federated learning: simulator, baselines and convergence bounds."""
from .core import DivergenceError, DomainError, StructuralError, weighted_average
from .data import Dataset, Partition, SyntheticProblem, load_idx, load_mnist, make_synthetic, partition_uniform
from .fed import FedConfig, FedResult, final_model, run_federated
from .models import ModelSpec
from .optim import RunTrace, run_centralized, run_interval_reference

__all__ = [
    "DivergenceError", "DomainError", "StructuralError", "weighted_average",
    "Dataset", "Partition", "SyntheticProblem", "load_idx", "load_mnist", "make_synthetic", "partition_uniform",
    "FedConfig", "FedResult", "final_model", "run_federated",
    "ModelSpec", "RunTrace", "run_centralized", "run_interval_reference",
]
