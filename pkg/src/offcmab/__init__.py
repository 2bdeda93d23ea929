"""Offline combinatorial bandits with probabilistically triggered arms.

Pessimistic base-arm estimation, combinatorial approximation oracles,
application environments (cascading ranking, LLM cache, influence
maximization, k-path), baseline algorithms, and a benchmark harness.
"""

__version__ = "0.1.0"

from .core import (
    Action,
    ArmStats,
    ConfidenceParams,
    CoverageReport,
    Dataset,
    OfflineRecord,
    SmoothnessSpec,
    aggregate,
    coverage_report,
    lcb,
    ucb,
    variance_adaptive_interval,
)
from .oracles import WeightedGraph, brute_force_best, greedy_im, influence_spread, top_k

__all__ = [
    "Action",
    "ArmStats",
    "ConfidenceParams",
    "CoverageReport",
    "Dataset",
    "OfflineRecord",
    "SmoothnessSpec",
    "aggregate",
    "coverage_report",
    "lcb",
    "ucb",
    "variance_adaptive_interval",
    "WeightedGraph",
    "brute_force_best",
    "greedy_im",
    "influence_spread",
    "top_k",
    "__version__",
]
