"""Exact desk-scale machinery for verifying the randomized estimators.

Everything here works by brute force: exhaustive enumeration of the
multi-type spanning forests of a tiny graph, and dense linear algebra by
Gaussian elimination with partial pivoting written in this module so that it
stays independent of the solvers it is used to check.
"""
import itertools
import logging
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from config.settings import settings
from models.forest import ForestKey, Mtsf, NodeKind, forest_from_lists
from models.graph import ConnectionGraph, SmoothingProblem
from models.signal import as_signal
from .errors import CapacityError, GraphError
from .estimators import (
    EstimatorKind,
    estimate_gradient_step,
    estimate_rao_blackwell,
    estimate_tilde,
)
from .operators import build_regularized, ensure_dense_size

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


# -- Dense linear algebra ---------------------------------------------------

def _lu_decompose(matrix: npt.ArrayLike) -> Tuple[np.ndarray, np.ndarray, int, bool]:
    """In-place style LU with partial pivoting; returns (lu, permutation, sign, singular)."""
    lu = np.array(matrix, dtype=np.complex128, copy=True)
    n = lu.shape[0]
    if lu.shape != (n, n):
        raise ValueError("Matrix must be square")
    permutation = np.arange(n)
    sign = 1
    for k in range(n):
        pivot = k + int(np.argmax(np.abs(lu[k:, k])))
        if lu[pivot, k] == 0:
            return lu, permutation, sign, True
        if pivot != k:
            lu[[k, pivot]] = lu[[pivot, k]]
            permutation[[k, pivot]] = permutation[[pivot, k]]
            sign = -sign
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, permutation, sign, False


def gaussian_det(matrix: npt.ArrayLike) -> complex:
    """Determinant by elimination."""
    matrix = np.asarray(matrix)
    if matrix.shape[0] == 0:
        return 1.0 + 0j
    lu, _, sign, singular = _lu_decompose(matrix)
    if singular:
        return 0j
    return complex(sign * np.prod(np.diag(lu)))


def gaussian_solve(matrix: npt.ArrayLike, rhs: npt.ArrayLike) -> np.ndarray:
    """Solve ``matrix x = rhs`` (vector or matrix right-hand side)."""
    lu, permutation, _, singular = _lu_decompose(matrix)
    if singular:
        raise np.linalg.LinAlgError("Singular matrix in elimination")
    n = lu.shape[0]
    b = np.array(rhs, dtype=np.complex128, copy=True)[permutation]
    for i in range(n):
        b[i] -= lu[i, :i] @ b[:i]
    for i in range(n - 1, -1, -1):
        b[i] = (b[i] - lu[i, i + 1:] @ b[i + 1:]) / lu[i, i]
    return b


def gaussian_inverse(matrix: npt.ArrayLike) -> np.ndarray:
    n = np.asarray(matrix).shape[0]
    return gaussian_solve(matrix, np.eye(n, dtype=np.complex128))


# -- Forest structures ------------------------------------------------------

class _DisjointSet:
    """Union-find over ``0..n-1`` with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


@dataclass
class _Component:
    nodes: List[int]
    edges: List[Pair]

    @property
    def is_tree(self) -> bool:
        return len(self.edges) == len(self.nodes) - 1

    @property
    def is_unicycle(self) -> bool:
        return len(self.edges) == len(self.nodes)


def _components(n: int, edges: Sequence[Pair]) -> List[_Component]:
    dsu = _DisjointSet(n)
    for a, b in edges:
        dsu.union(a, b)
    nodes: Dict[int, List[int]] = defaultdict(list)
    grouped: Dict[int, List[Pair]] = defaultdict(list)
    for v in range(n):
        nodes[dsu.find(v)].append(v)
    for a, b in edges:
        grouped[dsu.find(a)].append((a, b))
    return [_Component(nodes[key], grouped[key]) for key in sorted(nodes)]


def _cycle_order(component: _Component) -> List[int]:
    """Nodes of the unique cycle of a unicycle, in walk order."""
    adjacency: Dict[int, set] = {v: set() for v in component.nodes}
    for a, b in component.edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    leaves = deque(v for v, nb in adjacency.items() if len(nb) == 1)
    remaining = {v: set(nb) for v, nb in adjacency.items()}
    while leaves:
        leaf = leaves.popleft()
        for other in remaining.pop(leaf):
            remaining[other].discard(leaf)
            if len(remaining[other]) == 1:
                leaves.append(other)
    start = min(remaining)
    order = [start]
    previous, current = None, start
    while True:
        following = min(v for v in remaining[current] if v != previous)
        if following == start:
            break
        order.append(following)
        previous, current = current, following
    return order


def build_forest(graph: ConnectionGraph, roots: Iterable[int], edges: Iterable[Pair]) -> Mtsf:
    """Materialize the forest with the given root set and edge set.

    Raises:
        GraphError: if the pair does not form a multi-type spanning forest.
    """
    n = graph.n_nodes
    roots = sorted(set(int(r) for r in roots))
    edges = sorted((min(a, b), max(a, b)) for a, b in edges)
    root_set = set(roots)

    kind = [NodeKind.TREE.value] * n
    root = [-1] * n
    parent = [-1] * n
    rotation = [0.0] * n
    on_cycle = [False] * n
    cycle_angles: List[float] = []

    for component in _components(n, edges):
        adjacency: Dict[int, List[int]] = defaultdict(list)
        for a, b in component.edges:
            adjacency[a].append(b)
            adjacency[b].append(a)
        component_roots = [v for v in component.nodes if v in root_set]

        if component.is_tree:
            if len(component_roots) != 1:
                raise GraphError(f"Tree on {component.nodes} needs exactly one root")
            sources = component_roots
            r = sources[0]
            for v in component.nodes:
                root[v] = r
        elif component.is_unicycle:
            if component_roots:
                raise GraphError(f"Unicycle on {component.nodes} cannot hold a root")
            sources = _cycle_order(component)
            for k, v in enumerate(sources):
                kind[v] = NodeKind.UNICYCLE.value
                on_cycle[v] = True
                parent[v] = sources[(k + 1) % len(sources)]
            cycle_angles.append(graph.cycle_angle(graph.walk_edges(sources)))
        else:
            raise GraphError(f"Component on {component.nodes} has too many edges")

        # breadth-first from the root (or the cycle) outwards
        seen = set(sources)
        queue = deque(sources)
        while queue:
            node = queue.popleft()
            for other in sorted(adjacency[node]):
                if other in seen:
                    continue
                seen.add(other)
                kind[other] = kind[node]
                parent[other] = node
                rotation[other] = rotation[node] + graph.angle(node, other)
                queue.append(other)

    return forest_from_lists(kind, root, parent, rotation, on_cycle, cycle_angles)


def forest_weight(problem: SmoothingProblem, forest: Mtsf) -> float:
    """Unnormalized weight ``prod q_r prod w_e prod (2 - 2 cos theta_C)``."""
    graph = problem.graph
    weight = float(np.prod(problem.q[forest.roots]))
    for a, b in forest.edges():
        weight *= graph.weight(a, b)
    for angle in forest.cycle_angles:
        weight *= 2.0 - 2.0 * math.cos(angle)
    return weight


# -- Catalog ----------------------------------------------------------------

@dataclass
class CatalogEntry:
    """One forest with its unnormalized weight and probability."""
    roots: FrozenSet[int]
    edges: FrozenSet[Pair]
    weight: float
    probability: float
    forest: Mtsf

    @property
    def key(self) -> ForestKey:
        return self.roots, self.edges


@dataclass
class MtsfCatalog:
    """All forests of a small problem."""
    entries: List[CatalogEntry]
    partition_constant: float
    _index: Dict[ForestKey, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {entry.key: k for k, entry in enumerate(self.entries)}

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def probability_of(self, key: ForestKey) -> float:
        """Probability of a forest identified by (roots, edges); 0 if absent."""
        k = self._index.get(key)
        return 0.0 if k is None else self.entries[k].probability

    def __contains__(self, key: ForestKey) -> bool:
        return key in self._index

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([entry.probability for entry in self.entries])


def _check_enumeration_caps(graph: ConnectionGraph, max_nodes: Optional[int], max_edges: Optional[int]) -> None:
    max_nodes = settings.oracle_max_nodes if max_nodes is None else max_nodes
    max_edges = settings.oracle_max_edges if max_edges is None else max_edges
    if graph.n_nodes > max_nodes or graph.n_edges > max_edges:
        raise CapacityError(
            f"Enumeration is limited to {max_nodes} nodes and {max_edges} edges; "
            f"got {graph.n_nodes} nodes and {graph.n_edges} edges"
        )


def enumerate_mtsfs(
    problem: SmoothingProblem,
    max_nodes: Optional[int] = None,
    max_edges: Optional[int] = None,
) -> MtsfCatalog:
    """Every multi-type spanning forest of the problem's graph.

    Forests containing a perfectly coherent cycle are kept with weight 0.
    """
    graph = problem.graph
    _check_enumeration_caps(graph, max_nodes, max_edges)
    n = graph.n_nodes
    all_edges = [(min(s, t), max(s, t)) for s, t, _, _ in graph.edge_list()]

    entries: List[CatalogEntry] = []
    for size in range(0, min(n, len(all_edges)) + 1):
        for edges in itertools.combinations(all_edges, size):
            components = _components(n, edges)
            if not all(c.is_tree or c.is_unicycle for c in components):
                continue
            tree_nodes = [c.nodes for c in components if c.is_tree]
            for roots in itertools.product(*tree_nodes):
                forest = build_forest(graph, roots, edges)
                entries.append(
                    CatalogEntry(
                        roots=frozenset(roots),
                        edges=frozenset(edges),
                        weight=forest_weight(problem, forest),
                        probability=0.0,
                        forest=forest,
                    )
                )

    partition = float(sum(entry.weight for entry in entries))
    for entry in entries:
        entry.probability = entry.weight / partition
    logger.debug("Enumerated %d forests, partition constant %.6g", len(entries), partition)
    return MtsfCatalog(entries=entries, partition_constant=partition)


# -- Determinantal kernel ---------------------------------------------------

def twisted_incidence(problem: SmoothingProblem) -> np.ndarray:
    """Rows: ``sqrt(q_i)`` per node, then ``sqrt(w) (e_t - exp(i theta) e_s)`` per edge.

    ``M^H M = L + Q``.
    """
    graph = problem.graph
    n, m = graph.n_nodes, graph.n_edges
    nabla = np.zeros((n + m, n), dtype=np.complex128)
    nabla[np.arange(n), np.arange(n)] = np.sqrt(problem.q)
    root_w = np.sqrt(graph.weights)
    rows = n + np.arange(m)
    nabla[rows, graph.targets] = root_w
    nabla[rows, graph.sources] = -root_w * np.exp(1j * graph.angles)
    return nabla


def build_kernel(problem: SmoothingProblem, dense_cap: Optional[int] = None) -> np.ndarray:
    """Marginal kernel over nodes then edges: ``M (L + Q)^-1 M^H``."""
    graph = problem.graph
    ensure_dense_size(graph.n_nodes + graph.n_edges, "build_kernel", dense_cap)
    nabla = twisted_incidence(problem)
    inverse = gaussian_inverse(nabla.conj().T @ nabla)
    return nabla @ inverse @ nabla.conj().T


def forest_ground_indices(graph: ConnectionGraph, roots: Iterable[int], edges: Iterable[Pair]) -> List[int]:
    """Kernel indices of a forest: root nodes, then ``n + edge id``."""
    indices = sorted(int(r) for r in roots)
    indices += sorted(graph.n_nodes + graph.edge_index(a, b) for a, b in edges)
    return indices


def kernel_minor(kernel: np.ndarray, indices: Sequence[int]) -> float:
    indices = list(indices)
    return float(gaussian_det(kernel[np.ix_(indices, indices)]).real)


def max_non_forest_minor(problem: SmoothingProblem, kernel: np.ndarray, catalog: MtsfCatalog, limit: int = 50_000) -> float:
    """Largest absolute ``n``-subset minor of the kernel over subsets that are not forests."""
    graph = problem.graph
    n = graph.n_nodes
    ground = n + graph.n_edges
    if math.comb(ground, n) > limit:
        raise CapacityError(f"{math.comb(ground, n)} subsets exceed the sweep limit of {limit}")
    forests = {tuple(forest_ground_indices(graph, e.roots, e.edges)) for e in catalog}
    worst = 0.0
    for subset in itertools.combinations(range(ground), n):
        if subset in forests:
            continue
        worst = max(worst, abs(gaussian_det(kernel[np.ix_(subset, subset)])))
    return worst


# -- Exact moments ----------------------------------------------------------

def exact_smoothing(problem: SmoothingProblem, g: npt.ArrayLike) -> np.ndarray:
    """``(L + Q)^-1 Q g`` by elimination on ``M^H M``."""
    g = as_signal(g, problem.n_nodes, "g")
    nabla = twisted_incidence(problem)
    return gaussian_solve(nabla.conj().T @ nabla, problem.q * g)


def _estimates(
    problem: SmoothingProblem,
    g: np.ndarray,
    which: Union[str, EstimatorKind],
    alpha: Optional[float],
    catalog: MtsfCatalog,
) -> List[Tuple[float, np.ndarray]]:
    kind = EstimatorKind(which)
    operator = build_regularized(problem.graph, problem.q) if kind == EstimatorKind.GRADIENT_STEP else None
    results = []
    for entry in catalog:
        if entry.probability <= 0:
            continue
        if kind == EstimatorKind.TILDE:
            estimate = estimate_tilde(entry.forest, g)
        else:
            estimate = estimate_rao_blackwell(entry.forest, g, problem.q)
            if kind == EstimatorKind.GRADIENT_STEP:
                estimate = estimate_gradient_step(estimate, g, problem, alpha, operator)
        results.append((entry.probability, estimate))
    return results


def exact_estimator_expectation(
    problem: SmoothingProblem,
    g: npt.ArrayLike,
    which: Union[str, EstimatorKind],
    alpha: Optional[float] = None,
    catalog: Optional[MtsfCatalog] = None,
) -> np.ndarray:
    """``sum_phi P(phi) estimator(phi, g)``."""
    g = as_signal(g, problem.n_nodes, "g")
    if catalog is None:
        catalog = enumerate_mtsfs(problem)
    total = np.zeros(problem.n_nodes, dtype=np.complex128)
    for probability, estimate in _estimates(problem, g, which, alpha, catalog):
        total += probability * estimate
    return total


def exact_estimator_second_moment(
    problem: SmoothingProblem,
    g: npt.ArrayLike,
    which: Union[str, EstimatorKind],
    alpha: Optional[float] = None,
    q_weighted: bool = False,
    catalog: Optional[MtsfCatalog] = None,
) -> float:
    """``sum_phi P(phi) ||estimator(phi, g) - f_*||^2`` (Q-weighted norm on request)."""
    g = as_signal(g, problem.n_nodes, "g")
    if catalog is None:
        catalog = enumerate_mtsfs(problem)
    f_star = exact_smoothing(problem, g)
    weights = problem.q if q_weighted else np.ones(problem.n_nodes)
    return float(
        sum(
            probability * np.sum(weights * np.abs(estimate - f_star) ** 2)
            for probability, estimate in _estimates(problem, g, which, alpha, catalog)
        )
    )


def exact_tree_membership(problem: SmoothingProblem, catalog: Optional[MtsfCatalog] = None) -> np.ndarray:
    """Per-node probability of lying in a rooted tree rather than a unicycle."""
    if catalog is None:
        catalog = enumerate_mtsfs(problem)
    membership = np.zeros(problem.n_nodes)
    for entry in catalog:
        if entry.probability > 0:
            membership += entry.probability * entry.forest.tree_mask
    return membership


def exact_root_expectation(problem: SmoothingProblem, catalog: Optional[MtsfCatalog] = None) -> float:
    """Expected number of roots under the forest distribution."""
    if catalog is None:
        catalog = enumerate_mtsfs(problem)
    return float(sum(entry.probability * len(entry.roots) for entry in catalog))



# -- Report -----------------------------------------------------------------

@dataclass
class OracleReport:
    """Identity checks on one small instance."""
    n_nodes: int
    n_edges: int
    n_forests: int
    partition_constant: float
    determinant: float
    checks: Dict[str, float] = field(default_factory=dict)
    tolerance: float = 1e-8

    @property
    def passed(self) -> bool:
        return all(value <= self.tolerance for value in self.checks.values())

    def to_dict(self) -> Dict[str, object]:
        return {
            "n_nodes": self.n_nodes,
            "n_edges": self.n_edges,
            "n_forests": self.n_forests,
            "partition_constant": self.partition_constant,
            "determinant": self.determinant,
            "checks": dict(self.checks),
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def check_instance(problem: SmoothingProblem, g: npt.ArrayLike, tolerance: float = 1e-8) -> OracleReport:
    """Run every exact identity on a small instance; values are absolute or relative errors."""
    g = as_signal(g, problem.n_nodes, "g")
    graph = problem.graph
    catalog = enumerate_mtsfs(problem)
    nabla = twisted_incidence(problem)
    determinant = gaussian_det(nabla.conj().T @ nabla).real
    kernel = build_kernel(problem)
    f_star = exact_smoothing(problem, g)
    scale = max(float(np.linalg.norm(f_star)), 1.0)

    report = OracleReport(
        n_nodes=graph.n_nodes,
        n_edges=graph.n_edges,
        n_forests=len(catalog),
        partition_constant=catalog.partition_constant,
        determinant=determinant,
        tolerance=tolerance,
    )
    checks = report.checks
    checks["partition_vs_determinant"] = abs(catalog.partition_constant - determinant) / abs(determinant)
    checks["probability_sum"] = abs(float(catalog.probabilities.sum()) - 1.0)
    checks["kernel_projection"] = float(np.abs(kernel @ kernel - kernel).max())
    checks["kernel_minors"] = max(
        abs(kernel_minor(kernel, forest_ground_indices(graph, e.roots, e.edges)) - e.probability)
        for e in catalog
    )
    for which in EstimatorKind:
        expectation = exact_estimator_expectation(problem, g, which, catalog=catalog)
        checks[f"unbiased_{which.value}"] = float(np.linalg.norm(expectation - f_star)) / scale

    # Re-rooting trees gives E||f_tilde||_Q^2 = sum_j q_j |g_j|^2 P(j in a tree);
    # without unicycles this is ||g||_Q^2.
    q_norm_g = float(np.sum(problem.q * np.abs(g) ** 2))
    q_norm_f = float(np.sum(problem.q * np.abs(f_star) ** 2))
    tree_norm_g = float(np.sum(problem.q * exact_tree_membership(problem, catalog) * np.abs(g) ** 2))
    cross = float(np.real(np.vdot(g, problem.q * f_star)))
    variance_tilde = exact_estimator_second_moment(problem, g, "tilde", q_weighted=True, catalog=catalog)
    variance_rb = exact_estimator_second_moment(problem, g, "rb", q_weighted=True, catalog=catalog)
    checks["variance_tilde"] = abs(variance_tilde - (tree_norm_g - q_norm_f)) / max(q_norm_g, 1.0)
    checks["variance_rb"] = abs(variance_rb - (cross - q_norm_f)) / max(q_norm_g, 1.0)

    kernel_trace = float(np.trace(kernel[: graph.n_nodes, : graph.n_nodes]).real)
    checks["root_count_vs_trace"] = abs(exact_root_expectation(problem, catalog) - kernel_trace)
    return report
