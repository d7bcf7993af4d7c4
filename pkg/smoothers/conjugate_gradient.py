"""Conjugate-gradient smoothing arms."""
import numpy as np

from core.solvers import solve_cg
from models.signal import ComplexSignal
from .base import BaseSmoother, SmootherConfig, SmoothingResult


class CgSmoother(BaseSmoother):
    """``m`` iterations of CG, plain or Jacobi-preconditioned."""

    PRECONDITIONERS = {"cg": "none", "cg_diag": "diagonal"}

    def __init__(self, problem, config: SmootherConfig):
        if config.method not in self.PRECONDITIONERS:
            raise ValueError(f"CgSmoother cannot run method '{config.method}'")
        super().__init__(problem, config)

    @property
    def method_name(self) -> str:
        return self.config.method

    def _solve(self, g: ComplexSignal, rng: np.random.Generator) -> SmoothingResult:
        outcome = solve_cg(
            self.problem,
            g,
            self.config.m,
            preconditioner=self.PRECONDITIONERS[self.config.method],
            tol=self.config.tol,
        )
        return self._result(
            outcome.solution,
            converged=outcome.converged and not outcome.breakdown,
            iterations=outcome.iterations,
        )
