"""Exception hierarchy shared by every ForestSync module."""
from pathlib import Path
from typing import Optional, Union


class ForestSyncError(Exception):
    """Base class for all ForestSync errors."""


class GraphError(ForestSyncError, ValueError):
    """Invalid graph structure or a graph unsuitable for the requested operation."""


class DimensionError(ForestSyncError, ValueError):
    """Signal or operator dimensions do not match."""


class CapacityError(ForestSyncError, ValueError):
    """A dense or combinatorial size cap was exceeded."""


class SamplingError(ForestSyncError, RuntimeError):
    """A random walk cannot proceed or violates the sampling mode's assumptions."""


class SolverError(ForestSyncError, RuntimeError):
    """A deterministic solver failed its post-conditions."""


class SynchronizationError(ForestSyncError, RuntimeError):
    """Power iteration cannot continue."""


class DataFormatError(ForestSyncError, ValueError):
    """Malformed input file."""

    def __init__(self, message: str, path: Optional[Union[str, Path]] = None, line: Optional[int] = None):
        self.path = str(path) if path is not None else None
        self.line = line
        location = ""
        if self.path is not None:
            location = self.path if line is None else f"{self.path}:{line}"
            location += ": "
        super().__init__(f"{location}{message}")
