"""Clustering by simulated annealing and by Suzuki-Trotter quantum annealing,
both run as Gibbs samplers over label assignments, plus an exact dense
oracle for tiny instances."""

from .core import ContingencyTable, ReplicaChain, purity, similarity_s, similarity_sprime
from .energy import MoGNIWModel, NIWPrior, SquaredLossModel
from .sampler import RunResult, SamplerConfig, equal_budget_compare, run
from .schedule import ScheduleParams, coupling_f, default_params, schedule_at

__version__ = "0.1.0"

__all__ = [
    "ContingencyTable",
    "ReplicaChain",
    "purity",
    "similarity_s",
    "similarity_sprime",
    "MoGNIWModel",
    "NIWPrior",
    "SquaredLossModel",
    "RunResult",
    "SamplerConfig",
    "equal_budget_compare",
    "run",
    "ScheduleParams",
    "coupling_f",
    "default_params",
    "schedule_at",
]
