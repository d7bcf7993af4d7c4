"""Monte-Carlo estimators of ``f_* = (L + Q)^-1 Q g`` built on sampled forests."""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Union

import numpy as np
import numpy.typing as npt

from config.settings import settings
from models.forest import Mtsf
from models.graph import ConnectionGraph, SmoothingProblem
from models.signal import ComplexSignal, as_signal
from models.walk import SamplingMode, WalkConfig
from .errors import DimensionError, GraphError
from .operators import ConnectionOperator, build_regularized
from .sampler import MtsfSampler

logger = logging.getLogger(__name__)


class EstimatorKind(str, Enum):
    """Per-forest estimator."""
    TILDE = "tilde"
    RAO_BLACKWELL = "rb"
    GRADIENT_STEP = "gs"


@dataclass
class EstimateAccumulator:
    """Running (weighted) sum of replicate estimates.

    In exact mode every weight is 1 and ``weight_sum == m``.
    """
    n_nodes: int
    total: np.ndarray = field(default=None)
    weight_sum: float = 0.0
    weight_sq_sum: float = 0.0
    m: int = 0

    def __post_init__(self):
        if self.total is None:
            self.total = np.zeros(self.n_nodes, dtype=np.complex128)

    def add(self, estimate: npt.ArrayLike, weight: float = 1.0) -> None:
        estimate = np.asarray(estimate, dtype=np.complex128)
        if estimate.shape != (self.n_nodes,):
            raise DimensionError(f"Estimate of shape {estimate.shape} for {self.n_nodes} nodes")
        self.total += weight * estimate
        self.weight_sum += weight
        self.weight_sq_sum += weight * weight
        self.m += 1

    def merge(self, other: "EstimateAccumulator") -> "EstimateAccumulator":
        """Fold another accumulator into this one (order-independent)."""
        if other.n_nodes != self.n_nodes:
            raise DimensionError("Cannot merge accumulators of different sizes")
        self.total += other.total
        self.weight_sum += other.weight_sum
        self.weight_sq_sum += other.weight_sq_sum
        self.m += other.m
        return self

    @property
    def effective_sample_size(self) -> float:
        if self.weight_sq_sum <= 0:
            return 0.0
        return self.weight_sum ** 2 / self.weight_sq_sum

    def mean(self) -> ComplexSignal:
        if self.weight_sum <= 0:
            raise ValueError("Accumulator has zero total weight; nothing to combine")
        return self.total / self.weight_sum


def combine(accumulator: EstimateAccumulator) -> ComplexSignal:
    """Plain or self-normalized importance-sampling mean."""
    return accumulator.mean()


def estimate_tilde(forest: Mtsf, g: npt.ArrayLike) -> ComplexSignal:
    """Each tree node receives its root's value rotated along the tree; unicycle nodes get 0."""
    g = as_signal(g, forest.n_nodes, "g")
    out = np.zeros(forest.n_nodes, dtype=np.complex128)
    tree = forest.tree_mask
    out[tree] = np.exp(1j * forest.rotation[tree]) * g[forest.root[tree]]
    return out


def estimate_rao_blackwell(forest: Mtsf, g: npt.ArrayLike, q: Union[float, npt.ArrayLike]) -> ComplexSignal:
    """Average ``g`` over each tree in the root's frame, then rotate back.

    The root of a tree ``T`` receives ``sum_j q_j psi_{j->r} g_j / sum_j q_j``
    over ``j`` in ``T``; with uniform ``q`` this is the plain average. A tree
    whose nodes all have ``q_j = 0`` has probability zero and gets the plain
    average instead.
    """
    n = forest.n_nodes
    g = as_signal(g, n, "g")
    q = np.broadcast_to(np.asarray(q, dtype=float), (n,))
    out = np.zeros(n, dtype=np.complex128)
    nodes = np.flatnonzero(forest.tree_mask)
    if nodes.size == 0:
        return out
    roots = forest.root[nodes]
    phase = np.exp(1j * forest.rotation[nodes])
    contribution = q[nodes] * np.conj(phase) * g[nodes]
    numerator = np.bincount(roots, weights=contribution.real, minlength=n) + 1j * np.bincount(
        roots, weights=contribution.imag, minlength=n
    )
    denominator = np.bincount(roots, weights=q[nodes], minlength=n)
    zero_q = np.flatnonzero(denominator[roots] <= 0)
    if zero_q.size:
        rotated = np.conj(phase[zero_q]) * g[nodes[zero_q]]
        plain = np.bincount(roots[zero_q], weights=rotated.real, minlength=n) + 1j * np.bincount(
            roots[zero_q], weights=rotated.imag, minlength=n
        )
        counts = np.bincount(roots[zero_q], minlength=n).astype(float)
        empty = denominator <= 0
        numerator[empty] = plain[empty]
        denominator[empty] = counts[empty]
    averaged = np.divide(numerator, denominator, out=np.zeros(n, dtype=np.complex128), where=denominator > 0)
    out[nodes] = phase * averaged[roots]
    return out


def estimate_gradient_step(
    rb_estimate: npt.ArrayLike,
    g: npt.ArrayLike,
    problem: SmoothingProblem,
    alpha: Optional[float] = None,
    operator: Optional[ConnectionOperator] = None,
) -> ComplexSignal:
    """One preconditioned gradient step from ``rb_estimate``.

    ``f - alpha (D + Q)^-1 ((L + Q) f - Q g)``; the correction has zero mean,
    so the result stays unbiased.

    Raises:
        GraphError: if some node has ``d_i + q_i = 0``.
    """
    alpha = settings.default_alpha if alpha is None else alpha
    n = problem.n_nodes
    f = as_signal(rb_estimate, n, "estimate")
    g = as_signal(g, n, "g")
    if alpha == 0:
        return f.copy()
    scale = problem.graph.degrees + problem.q
    if np.any(scale <= 0):
        raise GraphError("Preconditioner undefined: some node has zero degree and zero q")
    if operator is None:
        operator = build_regularized(problem.graph, problem.q)
    residual = operator.matvec(f) - problem.q * g
    return f - alpha * residual / scale


def _forest_estimate(forest: Mtsf, g: np.ndarray, q: np.ndarray, kind: EstimatorKind) -> np.ndarray:
    if kind == EstimatorKind.TILDE:
        return estimate_tilde(forest, g)
    return estimate_rao_blackwell(forest, g, q)


def accumulate_forests(
    forests: Iterable[Mtsf],
    g: npt.ArrayLike,
    problem: SmoothingProblem,
    estimator: Union[str, EstimatorKind] = EstimatorKind.RAO_BLACKWELL,
) -> EstimateAccumulator:
    """Importance-weighted sum of per-forest estimates (``gs`` accumulates ``rb``)."""
    kind = EstimatorKind(estimator)
    g = as_signal(g, problem.n_nodes, "g")
    accumulator = EstimateAccumulator(problem.n_nodes)
    for forest in forests:
        accumulator.add(_forest_estimate(forest, g, problem.q, kind), forest.importance_weight)
    return accumulator


def mtsf_estimate(
    problem: SmoothingProblem,
    g: npt.ArrayLike,
    m: int,
    estimator: Union[str, EstimatorKind] = EstimatorKind.RAO_BLACKWELL,
    config: Optional[WalkConfig] = None,
    rng: Optional[np.random.Generator] = None,
    alpha: Optional[float] = None,
    sampler: Optional[MtsfSampler] = None,
) -> ComplexSignal:
    """Average of ``m`` forest estimates of ``f_*``.

    The gradient step is affine, so it is applied once to the combined
    Rao-Blackwell mean.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    kind = EstimatorKind(estimator)
    sampler = sampler or MtsfSampler(problem, config, rng)
    accumulator = accumulate_forests(sampler.sample_many(m), g, problem, kind)
    if sampler.config.mode == SamplingMode.IMPORTANCE:
        logger.debug("Importance sampling: effective sample size %.1f of %d", accumulator.effective_sample_size, m)
    estimate = combine(accumulator)
    if kind == EstimatorKind.GRADIENT_STEP:
        estimate = estimate_gradient_step(estimate, g, problem, alpha)
    return estimate


def smooth_normalized(
    graph: ConnectionGraph,
    q: float,
    g: npt.ArrayLike,
    m: int,
    estimator: Union[str, EstimatorKind] = EstimatorKind.RAO_BLACKWELL,
    config: Optional[WalkConfig] = None,
    rng: Optional[np.random.Generator] = None,
    alpha: Optional[float] = None,
) -> ComplexSignal:
    """Estimate ``q (N + q I)^-1 g`` for the normalized Laplacian ``N``.

    Uses ``q (N + qI)^-1 g = D^1/2 (L + qD)^-1 (qD) D^-1/2 g``.
    """
    problem = SmoothingProblem.normalized(graph, q)
    sqrt_d = np.sqrt(graph.degrees)
    g_scaled = as_signal(g, graph.n_nodes, "g") / sqrt_d
    return sqrt_d * mtsf_estimate(problem, g_scaled, m, estimator, config, rng, alpha)


def feynman_kac_point(
    problem: SmoothingProblem,
    g: npt.ArrayLike,
    node: int,
    m: int,
    rng: Optional[np.random.Generator] = None,
    config: Optional[WalkConfig] = None,
) -> complex:
    """Mean over ``m`` interrupted walks from ``node`` of the rotated value at the last node."""
    if m < 1:
        raise ValueError("m must be at least 1")
    g = as_signal(g, problem.n_nodes, "g")
    sampler = MtsfSampler(problem, config, rng)
    total = 0j
    for _ in range(m):
        last, angle, _ = sampler.walk_to_boundary(node)
        total += np.exp(-1j * angle) * g[last]
    return complex(total / m)


def estimate_dof(
    problem: SmoothingProblem,
    m: int,
    rng: Optional[np.random.Generator] = None,
    config: Optional[WalkConfig] = None,
) -> float:
    """Mean number of roots over ``m`` forests, an estimate of ``tr((L + Q)^-1 Q)``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    sampler = MtsfSampler(problem, config, rng)
    weighted_roots = 0.0
    weight_sum = 0.0
    for forest in sampler.sample_many(m):
        weight = forest.importance_weight
        weighted_roots += weight * forest.n_roots
        weight_sum += weight
    return weighted_roots / weight_sum


def ratio_standard_error(estimates: np.ndarray, weights: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-entry standard error of a (self-normalized) weighted mean of row estimates."""
    estimates = np.asarray(estimates)
    m = estimates.shape[0]
    weights = np.ones(m) if weights is None else np.asarray(weights, dtype=float)
    mean = weights @ estimates / weights.sum()
    spread = (weights[:, None] ** 2 * np.abs(estimates - mean) ** 2).sum(axis=0)
    correction = m / (m - 1) if m > 1 else 1.0
    return np.sqrt(spread * correction) / weights.sum()
