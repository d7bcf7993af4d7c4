"""Multi-type spanning forest sampler.

Random walks are started from the first unspanned node (ascending id) and
interrupted at the boundary with probability ``q_u / (d_u + q_u)``. A walk
stops when it is interrupted (its last node becomes a root), when it reaches
a node already spanned by the forest, or when it closes a cycle that is kept.
A closed cycle of holonomy ``theta_C`` is erased with probability
``cos(theta_C)``; in importance mode a cycle with ``cos(theta_C) <= 0`` is
always kept and contributes ``log(1 - cos(theta_C))`` to the forest's
log-weight.

Rotations are accumulated along the walk as raw angle sums ``acc``; the
rotation of a node relative to where its path attaches is a difference of two
sums, so loop erasure needs no patching beyond dropping the erased suffix.
"""
import itertools
import logging
import math
from bisect import bisect_right
from typing import Callable, Iterator, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from models.forest import Mtsf, NodeKind, forest_from_lists
from models.graph import ConnectionGraph, SmoothingProblem, wrap_angle
from models.walk import CycleDetection, SamplingMode, WalkConfig
from .cycle_detection import CycleDetector, MultiCounterDetector, OneCounterDetector
from .errors import SamplingError
from .operators import ensure_dense_size

logger = logging.getLogger(__name__)

BOUNDARY = -1

# cos(theta_C) below this is treated as a violation in exact mode
EXACT_MODE_TOLERANCE = 1e-12

DetectorFactory = Callable[[int], CycleDetector]


class UniformStream:
    """Uniform draws on [0, 1) pulled from a generator in fixed-size blocks."""

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self._rng = rng
        self._block = block
        self._buffer: List[float] = []
        self._position = 0

    def next(self) -> float:
        if self._position >= len(self._buffer):
            self._buffer = self._rng.random(self._block).tolist()
            self._position = 0
        value = self._buffer[self._position]
        self._position += 1
        return value


def check_walkable(problem: SmoothingProblem) -> None:
    """Reject problems on which some walk could never stop.

    Raises:
        SamplingError: for an isolated node with ``q = 0`` or a connected
            component without any positive ``q``.
    """
    graph = problem.graph
    q = problem.q
    stalled = np.flatnonzero((graph.degrees <= 0) & (q <= 0))
    if stalled.size:
        raise SamplingError(
            f"Node {int(stalled[0])} has zero degree and q = 0; the walk cannot move"
        )
    n = graph.n_nodes
    adjacency = sp.coo_matrix(
        (np.ones(graph.n_edges), (graph.sources, graph.targets)), shape=(n, n)
    )
    n_components, labels = connected_components(adjacency, directed=False)
    has_boundary = np.zeros(n_components, dtype=bool)
    has_boundary[labels[q > 0]] = True
    if not np.all(has_boundary):
        missing = int(np.flatnonzero(~has_boundary)[0])
        node = int(np.flatnonzero(labels == missing)[0])
        raise SamplingError(
            f"Connected component of node {node} has no positive q; walks there never reach the boundary"
        )


def random_successor(
    graph: ConnectionGraph, node: int, q: float, rng: np.random.Generator
) -> int:
    """One step of the interrupted walk from ``node``.

    Returns ``BOUNDARY`` with probability ``q / (d + q)``, else a neighbor ``v``
    with probability ``w_uv / (d + q)``.
    """
    degree = graph.degree(node)
    total = degree + q
    if total <= 0:
        raise SamplingError(f"Node {node} has zero degree and q = 0; the walk cannot move")
    x = rng.random() * total
    if x < q:
        return BOUNDARY
    cumulative = list(itertools.accumulate(graph.neighbor_weights[node]))
    k = min(bisect_right(cumulative, x - q), len(cumulative) - 1)
    return graph.neighbors[node][k]


class MtsfSampler:
    """Samples forests for one problem; owns its RNG and per-sample scratch."""

    def __init__(
        self,
        problem: SmoothingProblem,
        config: Optional[WalkConfig] = None,
        rng: Optional[np.random.Generator] = None,
        detector_factory: Optional[DetectorFactory] = None,
    ):
        check_walkable(problem)
        self.problem = problem
        self.config = config or WalkConfig()
        self.rng = rng if rng is not None else np.random.default_rng(self.config.rng_seed)
        self._uniforms = UniformStream(self.rng, self.config.uniform_block)

        graph = problem.graph
        self._q: List[float] = problem.q.tolist()
        self._total: List[float] = (graph.degrees + problem.q).tolist()
        self._cumulative = [list(itertools.accumulate(row)) for row in graph.neighbor_weights]
        self._neighbors = graph.neighbors
        self._angles = graph.neighbor_angles
        self._detector_factory = detector_factory or self._default_detector

        self.n_samples = 0
        self.total_steps = 0

    def _default_detector(self, n_nodes: int) -> CycleDetector:
        if self.config.cycle_detection == CycleDetection.ONE_COUNTER:
            return OneCounterDetector(n_nodes)
        return MultiCounterDetector(n_nodes, id_limit=self.config.multi_counter_cap)

    def _step(self, node: int) -> int:
        """Neighbor-table index of the next node, or ``BOUNDARY``."""
        x = self._uniforms.next() * self._total[node]
        q = self._q[node]
        if x < q:
            return BOUNDARY
        row = self._cumulative[node]
        k = bisect_right(row, x - q)
        return k if k < len(row) else len(row) - 1

    def random_successor(self, node: int) -> int:
        """Next node id or ``BOUNDARY``, drawn from this sampler's stream."""
        if self._total[node] <= 0:
            raise SamplingError(f"Node {node} has zero degree and q = 0; the walk cannot move")
        k = self._step(node)
        return BOUNDARY if k == BOUNDARY else self._neighbors[node][k]

    def walk_to_boundary(self, start: int) -> Tuple[int, float, int]:
        """Run one interrupted walk.

        Returns:
            The last node before the boundary, the summed edge angles along the
            walk, and the number of steps taken.
        """
        node, total_angle, steps = start, 0.0, 0
        while True:
            steps += 1
            k = self._step(node)
            if k == BOUNDARY:
                self.total_steps += steps
                return node, total_angle, steps
            total_angle += self._angles[node][k]
            node = self._neighbors[node][k]

    def sample_many(self, m: int) -> Iterator[Mtsf]:
        for _ in range(m):
            yield self.sample()

    def sample(self) -> Mtsf:
        """Draw one forest."""
        n = self.problem.n_nodes
        neighbors = self._neighbors
        angles = self._angles
        step = self._step
        importance = self.config.mode == SamplingMode.IMPORTANCE
        detector = self._detector_factory(n)
        on_path = detector.on_path
        visit = detector.visit

        spanned = [False] * n
        kind = [NodeKind.TREE.value] * n
        root = [-1] * n
        parent = [-1] * n
        rotation = [0.0] * n
        on_cycle = [False] * n
        next_node = [-1] * n
        acc = [0.0] * n
        cycle_angles: List[float] = []
        log_weight = 0.0
        steps = 0

        cursor = 0
        while True:
            while cursor < n and spanned[cursor]:
                cursor += 1
            if cursor == n:
                break
            start = cursor
            detector.start_walk(start)
            acc[start] = 0.0
            u = start
            while True:
                steps += 1
                k = step(u)
                if k == BOUNDARY:
                    # u becomes the root of the path start -> ... -> u
                    base = acc[u]
                    node = start
                    while True:
                        spanned[node] = True
                        root[node] = u
                        rotation[node] = wrap_angle(acc[node] - base)
                        if node == u:
                            break
                        parent[node] = next_node[node]
                        node = next_node[node]
                    break

                v = neighbors[u][k]
                theta = angles[u][k]
                next_node[u] = v

                if spanned[v]:
                    # attach to the component of v
                    attach_acc = acc[u] + theta
                    base_rotation = rotation[v]
                    component_kind = kind[v]
                    component_root = root[v]
                    node = start
                    while node != v:
                        spanned[node] = True
                        kind[node] = component_kind
                        root[node] = component_root
                        parent[node] = next_node[node]
                        rotation[node] = wrap_angle(base_rotation + acc[node] - attach_acc)
                        node = next_node[node]
                    break

                if on_path(v):
                    theta_c = acc[u] + theta - acc[v]
                    c = math.cos(theta_c)
                    if c < -EXACT_MODE_TOLERANCE and not importance:
                        raise SamplingError(
                            f"Cycle with holonomy {wrap_angle(theta_c):.6f} has cos < 0; the connection "
                            "is not weakly inconsistent, use importance mode"
                        )
                    if self._uniforms.next() < c:
                        detector.discard_cycle(v, next_node)
                        u = v
                        continue
                    if importance and c < 0:
                        log_weight += math.log1p(-c)
                    cycle_angles.append(wrap_angle(theta_c))
                    # branch start -> ... -> v, then the cycle v -> ... -> u -> v
                    base = acc[v]
                    node = start
                    while node != v:
                        spanned[node] = True
                        kind[node] = NodeKind.UNICYCLE.value
                        parent[node] = next_node[node]
                        rotation[node] = wrap_angle(acc[node] - base)
                        node = next_node[node]
                    while True:
                        spanned[node] = True
                        kind[node] = NodeKind.UNICYCLE.value
                        parent[node] = next_node[node]
                        on_cycle[node] = True
                        if node == u:
                            break
                        node = next_node[node]
                    break

                acc[v] = acc[u] + theta
                visit(v)
                u = v

        self.n_samples += 1
        self.total_steps += steps
        forest = forest_from_lists(kind, root, parent, rotation, on_cycle, cycle_angles, log_weight, steps)
        logger.debug(
            "Sampled forest: %d steps, %d roots, %d unicycles (%s)",
            steps, forest.n_roots, forest.n_unicycles, detector.scheme,
        )
        return forest


def sample_mtsf(
    problem: SmoothingProblem,
    config: Optional[WalkConfig] = None,
    rng: Optional[np.random.Generator] = None,
) -> Mtsf:
    """Draw a single forest with a throwaway sampler."""
    return MtsfSampler(problem, config, rng).sample()


def expected_steps_bound(problem: SmoothingProblem, dense_cap: Optional[int] = None) -> float:
    """``tr((L + Q)^-1 (D + Q))`` with the trivial-connection Laplacian L.

    Upper bound on the expected number of successor draws per forest.
    """
    graph = problem.graph
    n = graph.n_nodes
    ensure_dense_size(n, "expected_steps_bound", dense_cap)
    matrix = np.zeros((n, n))
    np.add.at(matrix, (graph.sources, graph.targets), -graph.weights)
    np.add.at(matrix, (graph.targets, graph.sources), -graph.weights)
    matrix[np.diag_indices(n)] += graph.degrees + problem.q
    inverse = np.linalg.inv(matrix)
    return float(np.sum(np.diag(inverse) * (graph.degrees + problem.q)))
