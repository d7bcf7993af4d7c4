"""Exact smoothing by dense factorization."""
from typing import Optional

import numpy as np

from core.solvers import DenseSolver
from models.signal import ComplexSignal
from .base import BaseSmoother, SmoothingResult


class ExactSmoother(BaseSmoother):
    """Reference arm; the factorization is computed once and reused."""

    _solver: Optional[DenseSolver] = None

    @property
    def method_name(self) -> str:
        return "exact"

    def _solve(self, g: ComplexSignal, rng: np.random.Generator) -> SmoothingResult:
        if self._solver is None:
            self._solver = DenseSolver(self.problem, self.config.dense_cap)
        return self._result(self._solver.solve(g))
