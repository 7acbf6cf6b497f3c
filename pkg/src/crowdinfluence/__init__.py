"""Influence-aware assignment of spatial tasks to crowd workers.

Worker-task influence combines a topic-model affinity, a mobility-based
willingness and social propagation estimated from random reverse reachable
sets. Each time instance is then solved as a min-cost max-flow problem.
"""
from ._backend import NAME as BACKEND
from .errors import ConfigError, DataError, DomainError, InvariantError
from .model import CandidatePair, Snapshot, SpatialTask, Worker, distance, eligible_pairs, travel_time

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CandidatePair",
    "ConfigError",
    "DataError",
    "DomainError",
    "InvariantError",
    "Snapshot",
    "SpatialTask",
    "Worker",
    "distance",
    "eligible_pairs",
    "travel_time",
]
