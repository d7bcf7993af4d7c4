"""Angular synchronization by regularized inverse power iteration, plus tree baselines."""
import logging
import time
from collections import deque
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import numpy.typing as npt
import scipy.linalg

from models.graph import ConnectionGraph, SmoothingProblem
from models.signal import ComplexSignal, as_signal, unit_phases
from models.walk import WalkConfig
from smoothers.base import BaseSmoother
from .errors import GraphError, SynchronizationError
from .operators import build_adjacency, build_connection_laplacian, ensure_dense_size
from .sampler import MtsfSampler

logger = logging.getLogger(__name__)


@dataclass
class SyncErrorResult:
    """Synchronization error and whether the optimal global phase was undetermined."""
    value: float
    degenerate: bool = False


def sync_error_detail(f: npt.ArrayLike, x_true: npt.ArrayLike) -> SyncErrorResult:
    """``min_r ||f - r x|| / n`` over unit-modulus ``r``.

    The minimizer is the phase of ``<x, f>``; when that inner product
    vanishes every phase is optimal and ``r = 1`` is used.
    """
    f = np.asarray(f, dtype=np.complex128).reshape(-1)
    x = as_signal(x_true, f.shape[0], "x_true")
    n = f.shape[0]
    inner = np.vdot(x, f)
    if abs(inner) <= np.finfo(float).eps * max(np.linalg.norm(f) * np.linalg.norm(x), 1e-300):
        return SyncErrorResult(float(np.linalg.norm(f - x) / n), degenerate=True)
    phase = inner / abs(inner)
    return SyncErrorResult(float(np.linalg.norm(f - phase * x) / n))


def sync_error(f: npt.ArrayLike, x_true: npt.ArrayLike) -> float:
    return sync_error_detail(f, x_true).value


def random_phase_init(n: int, rng: np.random.Generator) -> ComplexSignal:
    """Uniform unit-modulus entries, scaled to unit norm."""
    return unit_phases(rng.uniform(0.0, 2.0 * np.pi, n)) / np.sqrt(n)


@dataclass
class IterationRecord:
    k: int
    wall_time: float
    rayleigh: float
    sync_error: Optional[float] = None


@dataclass
class SyncResult:
    """Final iterate and per-iteration history (entry 0 describes ``f0``)."""
    f: ComplexSignal
    k: int
    method: str
    history: List[IterationRecord] = field(default_factory=list)

    @property
    def final_error(self) -> Optional[float]:
        return self.history[-1].sync_error if self.history else None


def _normalize(h: np.ndarray, componentwise: bool) -> np.ndarray:
    n = h.shape[0]
    if componentwise:
        modulus = np.abs(h)
        phases = np.where(modulus > 0, h / np.where(modulus > 0, modulus, 1.0), 1.0)
        return phases / np.sqrt(n)
    return h / np.linalg.norm(h)


def _record(
    k: int,
    started: float,
    f: np.ndarray,
    laplacian,
    x_true: Optional[np.ndarray],
) -> IterationRecord:
    n = f.shape[0]
    error = sync_error(np.sqrt(n) * f, x_true) if x_true is not None else None
    return IterationRecord(
        k=k,
        wall_time=time.perf_counter() - started,
        rayleigh=laplacian.quadratic_form(f) / float(np.vdot(f, f).real),
        sync_error=error,
    )


def power_iterate(
    problem: SmoothingProblem,
    smoother: BaseSmoother,
    k: int,
    f0: Optional[npt.ArrayLike] = None,
    rng: Optional[np.random.Generator] = None,
    componentwise: bool = False,
    x_true: Optional[npt.ArrayLike] = None,
) -> SyncResult:
    """Run ``k`` steps of ``f <- smooth(f) / ||smooth(f)||``.

    Smoothing approximates ``(L + Q)^-1 Q f``, which is proportional to the
    inverse-iteration step for uniform ``q``.

    Args:
        smoother: Any smoothing arm built on ``problem``.
        f0: Start vector; drawn with `random_phase_init` if omitted.
        componentwise: Project each iterate entrywise onto unit modulus
            (then scale to unit norm) instead of normalizing globally.
        x_true: Ground-truth phases; enables ``sync_error`` in the history,
            evaluated on ``sqrt(n) f``.

    Raises:
        SynchronizationError: if a smoothing fails or returns a numerically
            zero vector.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    n = problem.n_nodes
    rng = rng if rng is not None else np.random.default_rng()
    f = random_phase_init(n, rng) if f0 is None else as_signal(f0, n, "f0")
    norm = np.linalg.norm(f)
    if norm == 0 or not np.isfinite(norm):
        raise SynchronizationError("Initial vector must be nonzero and finite")
    f = _normalize(f, componentwise)
    x = None if x_true is None else as_signal(x_true, n, "x_true")

    laplacian = build_connection_laplacian(problem.graph)
    started = time.perf_counter()
    result = SyncResult(f=f, k=0, method=smoother.method_name)
    result.history.append(_record(0, started, f, laplacian, x))

    for step in range(1, k + 1):
        outcome = smoother.smooth(f, rng)
        if not outcome.success:
            raise SynchronizationError(f"Smoothing failed at iteration {step}: {outcome.error_message}")
        h = outcome.solution
        h_norm = np.linalg.norm(h)
        if not np.isfinite(h_norm) or h_norm <= 1e-14 * np.linalg.norm(f):
            raise SynchronizationError(
                f"Smoothing returned a numerically zero vector at iteration {step} (norm {h_norm:.3e})"
            )
        f = _normalize(h, componentwise)
        result.history.append(_record(step, started, f, laplacian, x))
        result.k = step

    result.f = f
    logger.info(
        "Power iteration (%s): k=%d, Rayleigh quotient %.6g",
        smoother.method_name, k, result.history[-1].rayleigh,
    )
    return result


def power_iterate_adjacency(
    graph: ConnectionGraph,
    k: int,
    f0: Optional[npt.ArrayLike] = None,
    rng: Optional[np.random.Generator] = None,
    x_true: Optional[npt.ArrayLike] = None,
) -> SyncResult:
    """Plain power iteration on ``A_theta`` (benchmark arm)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    n = graph.n_nodes
    rng = rng if rng is not None else np.random.default_rng()
    f = random_phase_init(n, rng) if f0 is None else as_signal(f0, n, "f0")
    f = f / np.linalg.norm(f)
    x = None if x_true is None else as_signal(x_true, n, "x_true")

    adjacency = build_adjacency(graph)
    laplacian = build_connection_laplacian(graph)
    started = time.perf_counter()
    result = SyncResult(f=f, k=0, method="adjacency")
    result.history.append(_record(0, started, f, laplacian, x))
    for step in range(1, k + 1):
        h = adjacency.matvec(f)
        h_norm = np.linalg.norm(h)
        if h_norm == 0:
            raise SynchronizationError(f"A_theta f vanished at iteration {step}")
        f = h / h_norm
        result.history.append(_record(step, started, f, laplacian, x))
        result.k = step
    result.f = f
    return result


# Tree baselines

def propagate_along_tree(graph: ConnectionGraph, parent: Sequence[int]) -> ComplexSignal:
    """Unit-modulus assignment: roots get phase 1, children ``exp(i theta_{p->c}) x_p``."""
    n = graph.n_nodes
    parent = list(parent)
    if len(parent) != n:
        raise GraphError(f"Parent array has {len(parent)} entries, expected {n}")
    x = np.zeros(n, dtype=np.complex128)
    resolved = [False] * n
    for node in range(n):
        chain = []
        current = node
        while not resolved[current]:
            chain.append(current)
            up = parent[current]
            if up < 0:
                break
            current = up
            if len(chain) > n:
                raise GraphError("Parent array contains a cycle")
        for child in reversed(chain):
            up = parent[child]
            x[child] = 1.0 if up < 0 else np.exp(1j * graph.angle(up, child)) * x[up]
            resolved[child] = True
    return x


def _require_connected(graph: ConnectionGraph, what: str) -> None:
    if not graph.is_connected():
        raise GraphError(f"{what} needs a connected graph")


def sync_ust_baseline(
    problem: SmoothingProblem,
    rng: Optional[np.random.Generator] = None,
    config: Optional[WalkConfig] = None,
) -> ComplexSignal:
    """Propagate phases along a random spanning tree rooted at a uniform node.

    The tree is drawn by the forest sampler on the trivial connection with
    ``q`` supported on the root only, which makes it the (weighted) uniform
    spanning tree.
    """
    graph = problem.graph
    _require_connected(graph, "UST baseline")
    rng = rng if rng is not None else np.random.default_rng()
    root = int(rng.integers(graph.n_nodes))
    q = np.zeros(graph.n_nodes)
    q[root] = 1.0
    trivial = SmoothingProblem(graph.with_trivial_connection(), q)
    forest = MtsfSampler(trivial, config, rng).sample()
    return propagate_along_tree(graph, forest.parent)


def _bfs_parents(tree: nx.Graph, root: int, n: int) -> List[int]:
    parent = [-1] * n
    seen = {root}
    queue = deque([root])
    while queue:
        node = queue.popleft()
        for other in sorted(tree.neighbors(node)):
            if other not in seen:
                seen.add(other)
                parent[other] = node
                queue.append(other)
    return parent


def sync_mst_baseline(problem: SmoothingProblem) -> ComplexSignal:
    """Propagate phases from node 0 along a maximum spanning tree for ``|cos theta|``."""
    graph = problem.graph
    _require_connected(graph, "MST baseline")
    weighted = nx.Graph()
    weighted.add_nodes_from(range(graph.n_nodes))
    for s, t, _, theta in graph.edge_list():
        weighted.add_edge(s, t, weight=abs(np.cos(theta)))
    tree = nx.maximum_spanning_tree(weighted, algorithm="kruskal")
    return propagate_along_tree(graph, _bfs_parents(tree, 0, graph.n_nodes))


# Dense references

def bottom_eigenpair(graph: ConnectionGraph, dense_cap: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Two smallest eigenvalues of ``L_theta`` and the bottom eigenvector."""
    ensure_dense_size(graph.n_nodes, "bottom_eigenpair", dense_cap)
    matrix = build_connection_laplacian(graph).matrix.toarray()
    top = min(1, graph.n_nodes - 1)
    values, vectors = scipy.linalg.eigh(matrix, subset_by_index=[0, top])
    return values, vectors[:, 0]


def convergence_ratio(graph: ConnectionGraph, q: float, dense_cap: Optional[int] = None) -> float:
    """``(lambda_1 + q) / (lambda_2 + q)``, the per-step contraction of exact inverse iteration."""
    values, _ = bottom_eigenpair(graph, dense_cap)
    if values.shape[0] < 2:
        return 0.0
    return float((values[0] + q) / (values[1] + q))
