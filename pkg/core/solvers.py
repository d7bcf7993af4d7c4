"""Deterministic smoothing solvers: dense factorization and conjugate gradient."""
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import numpy.typing as npt
import scipy.linalg

from config.settings import settings
from models.graph import ConnectionGraph, SmoothingProblem
from models.signal import ComplexSignal, as_signal
from .errors import SolverError
from .operators import build_regularized, ensure_dense_size

logger = logging.getLogger(__name__)


class DenseSolver:
    """Hermitian positive-definite factorization of ``L + Q``, reusable across right-hand sides."""

    def __init__(self, problem: SmoothingProblem, dense_cap: Optional[int] = None):
        ensure_dense_size(problem.n_nodes, "solve_exact", dense_cap)
        self.problem = problem
        self.operator = build_regularized(problem.graph, problem.q)
        matrix = self.operator.matrix.toarray()
        try:
            self._factor = scipy.linalg.cho_factor(matrix, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"L + Q is not positive definite: {exc}") from exc

    def solve(self, g: npt.ArrayLike) -> ComplexSignal:
        """``(L + Q)^-1 Q g``, checked by its residual."""
        g = as_signal(g, self.problem.n_nodes, "g")
        rhs = self.problem.q * g
        f = scipy.linalg.cho_solve(self._factor, rhs, check_finite=False)
        residual = np.linalg.norm(self.operator.matvec(f) - rhs)
        if residual > 1e-8 * max(np.linalg.norm(rhs), np.finfo(float).tiny):
            raise SolverError(f"Dense solve residual {residual:.3e} exceeds tolerance")
        return f


def solve_exact(problem: SmoothingProblem, g: npt.ArrayLike, dense_cap: Optional[int] = None) -> ComplexSignal:
    """``f_* = (L + Q)^-1 Q g`` by dense Cholesky."""
    return DenseSolver(problem, dense_cap).solve(g)


@dataclass
class CGResult:
    """Outcome of a conjugate-gradient run."""
    solution: np.ndarray
    iterations: int
    converged: bool
    breakdown: bool = False
    residual_norms: List[float] = field(default_factory=list)
    elapsed: List[float] = field(default_factory=list)


def solve_cg(
    problem: SmoothingProblem,
    g: npt.ArrayLike,
    m_iters: int,
    preconditioner: str = "none",
    tol: float = 0.0,
) -> CGResult:
    """Preconditioned CG on ``(L + Q) f = Q g`` started at ``f_0 = g``.

    Args:
        m_iters: Maximum number of iterations.
        preconditioner: ``"none"`` or ``"diagonal"`` (Jacobi, ``(D + Q)^-1``).
        tol: Stop once ``||r|| <= tol ||Q g||``. An exactly zero residual
            always stops the run.

    Returns:
        A `CGResult`; ``elapsed[k]`` is the wall time after iteration ``k``
        and ``residual_norms[k]`` the residual there (index 0 is the start).
    """
    if m_iters < 1:
        raise ValueError("m_iters must be at least 1")
    if preconditioner not in ("none", "diagonal"):
        raise ValueError(f"Unknown preconditioner '{preconditioner}'")

    n = problem.n_nodes
    g = as_signal(g, n, "g")
    operator = build_regularized(problem.graph, problem.q)
    matrix = operator.matrix
    rhs = problem.q * g
    threshold = max(tol * np.linalg.norm(rhs), 0.0)

    if preconditioner == "diagonal":
        scale = problem.graph.degrees + problem.q
        if np.any(scale <= 0):
            raise SolverError("Diagonal preconditioner undefined: some node has d_i + q_i = 0")
        inverse_diagonal = 1.0 / scale
    else:
        inverse_diagonal = None

    started = time.perf_counter()
    x = g.copy()
    r = rhs - matrix @ x
    z = r * inverse_diagonal if inverse_diagonal is not None else r.copy()
    p = z.copy()
    rz = float(np.vdot(r, z).real)
    residual = float(np.linalg.norm(r))
    result = CGResult(solution=x, iterations=0, converged=False)
    result.residual_norms.append(residual)
    result.elapsed.append(time.perf_counter() - started)

    for iteration in range(1, m_iters + 1):
        if residual == 0.0 or residual <= threshold:
            result.converged = True
            break
        ap = matrix @ p
        curvature = float(np.vdot(p, ap).real)
        if curvature <= 0.0:
            logger.warning("CG breakdown at iteration %d (curvature %.3e)", iteration, curvature)
            result.breakdown = True
            break
        step = rz / curvature
        x += step * p
        r -= step * ap
        z = r * inverse_diagonal if inverse_diagonal is not None else r
        rz_next = float(np.vdot(r, z).real)
        p = z + (rz_next / rz) * p
        rz = rz_next
        residual = float(np.linalg.norm(r))
        result.iterations = iteration
        result.residual_norms.append(residual)
        result.elapsed.append(time.perf_counter() - started)
        logger.debug("CG iteration %d: residual %.3e", iteration, residual)
    else:
        result.converged = residual == 0.0 or residual <= threshold

    result.solution = x
    return result


def approximation_error(f: npt.ArrayLike, f_star: npt.ArrayLike) -> float:
    """``||f - f_*|| / n``."""
    f = np.asarray(f)
    return float(np.linalg.norm(f - np.asarray(f_star)) / f.shape[0])


def reconstruction_error(f: npt.ArrayLike, f_true: npt.ArrayLike) -> float:
    """``||f - f_true|| / n``."""
    return approximation_error(f, f_true)


def q_grid(points: Optional[int] = None, upper: Optional[float] = None) -> np.ndarray:
    """Log-spaced grid of ``points`` values in ``(0, upper)``."""
    points = settings.q_grid_points if points is None else points
    upper = settings.q_grid_upper if upper is None else upper
    return np.logspace(np.log10(upper) - 4.0, np.log10(upper), points + 1)[:-1]


def optimal_q(
    graph: ConnectionGraph,
    g: npt.ArrayLike,
    f_true: npt.ArrayLike,
    grid: Optional[Sequence[float]] = None,
    dense_cap: Optional[int] = None,
) -> float:
    """The grid value of ``q`` whose exact smoothing of ``g`` best reconstructs ``f_true``."""
    grid = q_grid() if grid is None else np.asarray(grid, dtype=float)
    errors = [
        reconstruction_error(solve_exact(SmoothingProblem.uniform(graph, q), g, dense_cap), f_true)
        for q in grid
    ]
    best = int(np.argmin(errors))
    logger.info("q grid search: best q = %.4g (e_r = %.4g)", grid[best], errors[best])
    return float(grid[best])
