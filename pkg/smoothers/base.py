"""Base class for smoothing arms."""
import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np
import numpy.typing as npt

from core.errors import ForestSyncError
from models.graph import SmoothingProblem
from models.signal import ComplexSignal, as_signal
from models.walk import CycleDetection, SamplingMode

logger = logging.getLogger(__name__)


@dataclass
class SmoothingResult:
    """Result from one smoothing call."""
    success: bool
    solution: Optional[ComplexSignal]
    method: str
    m: int
    wall_time: float = 0.0
    converged: bool = True
    iterations: Optional[int] = None
    error_message: Optional[str] = None


@dataclass
class SmootherConfig:
    """Configuration for a smoothing arm.

    ``m`` is the number of forests for MTSF arms and the number of
    iterations for CG arms; the exact arm ignores it.
    """
    method: str
    m: int = 1
    alpha: Optional[float] = None
    mode: SamplingMode = SamplingMode.EXACT
    cycle_detection: Optional[CycleDetection] = None
    reuse_forests: bool = False
    dense_cap: Optional[int] = None
    tol: float = 0.0


class BaseSmoother(ABC):
    """Approximates ``f_* = (L + Q)^-1 Q g`` for a fixed problem."""

    def __init__(self, problem: SmoothingProblem, config: SmootherConfig):
        if config.m < 1:
            raise ValueError("m must be at least 1")
        self.problem = problem
        self.config = config

    @property
    @abstractmethod
    def method_name(self) -> str:
        """Return the method name used by the registry."""
        pass

    @abstractmethod
    def _solve(self, g: ComplexSignal, rng: np.random.Generator) -> SmoothingResult:
        """Compute the estimate; timing and error capture are done by `smooth`."""
        pass

    def smooth(self, g: npt.ArrayLike, rng: Optional[np.random.Generator] = None) -> SmoothingResult:
        """Smooth ``g``; failures are reported on the result rather than raised."""
        g = as_signal(g, self.problem.n_nodes, "g")
        rng = rng if rng is not None else np.random.default_rng()
        started = time.perf_counter()
        try:
            result = self._solve(g, rng)
        except ForestSyncError as exc:
            logger.error("%s failed: %s", self.method_name, exc)
            return SmoothingResult(
                success=False,
                solution=None,
                method=self.method_name,
                m=self.config.m,
                wall_time=time.perf_counter() - started,
                error_message=str(exc),
            )
        result.wall_time = time.perf_counter() - started
        return result

    def _result(self, solution: ComplexSignal, **extra) -> SmoothingResult:
        return SmoothingResult(
            success=True,
            solution=solution,
            method=self.method_name,
            m=self.config.m,
            **extra,
        )
