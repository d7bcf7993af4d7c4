"""Normalized-Laplacian smoothing through any inner arm."""
import numpy as np

from models.graph import SmoothingProblem
from models.signal import ComplexSignal
from .base import BaseSmoother, SmoothingResult


class NormalizedSmoother(BaseSmoother):
    """Computes ``q (N + q I)^-1 g`` for ``N = D^-1/2 L D^-1/2``.

    The inner arm runs on the problem ``Q = q D``, on the signal
    ``D^-1/2 g``, and its output is scaled back by ``D^1/2``.
    """

    def __init__(self, inner: BaseSmoother):
        super().__init__(inner.problem, inner.config)
        self.inner = inner
        self._sqrt_degrees = np.sqrt(inner.problem.graph.degrees)

    @classmethod
    def wrap(cls, problem: SmoothingProblem, inner_factory) -> "NormalizedSmoother":
        """Build the inner arm on the ``Q = q D`` version of a uniform problem."""
        normalized = SmoothingProblem.normalized(problem.graph, problem.q_scalar)
        return cls(inner_factory(normalized))

    @property
    def method_name(self) -> str:
        return f"normalized_{self.inner.method_name}"

    def _solve(self, g: ComplexSignal, rng: np.random.Generator) -> SmoothingResult:
        result = self.inner.smooth(g / self._sqrt_degrees, rng)
        if not result.success:
            result.method = self.method_name
            return result
        result.solution = self._sqrt_degrees * result.solution
        result.method = self.method_name
        return result
