"""Algorithms: operators, samplers, estimators, solvers, synchronization.

Submodules are imported by their full path; only the error hierarchy is
re-exported here because the data models depend on it.
"""
from .errors import (
    CapacityError,
    DataFormatError,
    DimensionError,
    ForestSyncError,
    GraphError,
    SamplingError,
    SolverError,
    SynchronizationError,
)

__all__ = [
    "CapacityError",
    "DataFormatError",
    "DimensionError",
    "ForestSyncError",
    "GraphError",
    "SamplingError",
    "SolverError",
    "SynchronizationError",
]
