"""Connection graph and the smoothing problem bound to it."""
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from core.errors import DimensionError, GraphError

TWO_PI = 2.0 * math.pi

Edge = Tuple[int, int, float, float]


def wrap_angle(theta: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    wrapped = math.pi - (math.pi - theta) % TWO_PI
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


def wrap_angles(theta: np.ndarray) -> np.ndarray:
    """Vectorized `wrap_angle`."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), TWO_PI)
    return np.where(wrapped <= -np.pi, wrapped + TWO_PI, wrapped)


@dataclass(frozen=True, eq=False)
class ConnectionGraph:
    """Weighted undirected graph carrying a rotation angle per oriented edge.

    Edges are stored once, in the orientation given at build time. Per-node
    neighbor tables hold both orientations, sorted by neighbor id, with the
    angle of the oriented edge ``i -> j`` (the reverse carries the negated angle).
    """

    n_nodes: int
    sources: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    angles: np.ndarray = field(repr=False)
    degrees: np.ndarray = field(repr=False)
    neighbors: Tuple[Tuple[int, ...], ...] = field(repr=False)
    neighbor_weights: Tuple[Tuple[float, ...], ...] = field(repr=False)
    neighbor_angles: Tuple[Tuple[float, ...], ...] = field(repr=False)
    _lookup: Dict[Tuple[int, int], Tuple[int, float, float]] = field(repr=False)

    @classmethod
    def build(cls, edge_list: Iterable[Sequence[float]], n_nodes: Optional[int] = None) -> "ConnectionGraph":
        """Build a graph from ``(i, j, w, theta)`` tuples.

        Args:
            edge_list: One entry per undirected pair, in its chosen orientation.
            n_nodes: Node count; defaults to the largest id plus one.

        Raises:
            GraphError: on self-loops, duplicate pairs, nonpositive weights,
                non-finite values or ids outside ``[0, n_nodes)``.
        """
        edges: List[Edge] = []
        for entry in edge_list:
            if len(entry) != 4:
                raise GraphError(f"Edge entry {tuple(entry)!r} must be (i, j, w, theta)")
            i, j, w, theta = entry
            if int(i) != i or int(j) != j:
                raise GraphError(f"Node ids must be integers, got ({i}, {j})")
            edges.append((int(i), int(j), float(w), float(theta)))

        if n_nodes is None:
            n_nodes = 1 + max((max(i, j) for i, j, _, _ in edges), default=-1)
        if n_nodes < 0:
            raise GraphError("n_nodes must be nonnegative")

        seen: Dict[Tuple[int, int], int] = {}
        for k, (i, j, w, theta) in enumerate(edges):
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise GraphError(f"Edge ({i}, {j}) references a node outside [0, {n_nodes})")
            if i == j:
                raise GraphError(f"Self-loop at node {i}")
            if not (math.isfinite(w) and w > 0):
                raise GraphError(f"Edge ({i}, {j}) has nonpositive or non-finite weight {w}")
            if not math.isfinite(theta):
                raise GraphError(f"Edge ({i}, {j}) has non-finite angle {theta}")
            pair = (min(i, j), max(i, j))
            if pair in seen:
                raise GraphError(f"Duplicate edge between {pair[0]} and {pair[1]}")
            seen[pair] = k

        m = len(edges)
        sources = np.fromiter((e[0] for e in edges), dtype=np.int64, count=m)
        targets = np.fromiter((e[1] for e in edges), dtype=np.int64, count=m)
        weights = np.fromiter((e[2] for e in edges), dtype=float, count=m)
        angles = wrap_angles(np.fromiter((e[3] for e in edges), dtype=float, count=m))

        degrees = np.bincount(sources, weights=weights, minlength=n_nodes)
        degrees = degrees + np.bincount(targets, weights=weights, minlength=n_nodes)

        rows: List[List[Tuple[int, float, float]]] = [[] for _ in range(n_nodes)]
        lookup: Dict[Tuple[int, int], Tuple[int, float, float]] = {}
        for k in range(m):
            s, t, w, theta = int(sources[k]), int(targets[k]), float(weights[k]), float(angles[k])
            reverse = wrap_angle(-theta)
            rows[s].append((t, w, theta))
            rows[t].append((s, w, reverse))
            lookup[(s, t)] = (k, w, theta)
            lookup[(t, s)] = (k, w, reverse)
        for row in rows:
            row.sort(key=lambda entry: entry[0])

        return cls(
            n_nodes=n_nodes,
            sources=sources,
            targets=targets,
            weights=weights,
            angles=angles,
            degrees=degrees,
            neighbors=tuple(tuple(e[0] for e in row) for row in rows),
            neighbor_weights=tuple(tuple(e[1] for e in row) for row in rows),
            neighbor_angles=tuple(tuple(e[2] for e in row) for row in rows),
            _lookup=lookup,
        )

    # Queries

    @property
    def n_edges(self) -> int:
        return int(self.sources.shape[0])

    @property
    def mean_degree(self) -> float:
        return float(self.degrees.mean()) if self.n_nodes else 0.0

    @property
    def max_degree(self) -> float:
        return float(self.degrees.max()) if self.n_nodes else 0.0

    def degree(self, node: int) -> float:
        return float(self.degrees[node])

    def has_edge(self, i: int, j: int) -> bool:
        return (i, j) in self._lookup

    def angle(self, i: int, j: int) -> float:
        """Angle of the oriented edge ``i -> j``."""
        return self._entry(i, j)[2]

    def weight(self, i: int, j: int) -> float:
        return self._entry(i, j)[1]

    def edge_index(self, i: int, j: int) -> int:
        """Id of the undirected edge ``{i, j}`` in build order."""
        return self._entry(i, j)[0]

    def _entry(self, i: int, j: int) -> Tuple[int, float, float]:
        try:
            return self._lookup[(i, j)]
        except KeyError:
            raise GraphError(f"No edge between {i} and {j}") from None

    def edge_list(self) -> List[Edge]:
        """Edges as ``(i, j, w, theta)`` in build order and orientation."""
        return [
            (int(s), int(t), float(w), float(theta))
            for s, t, w, theta in zip(self.sources, self.targets, self.weights, self.angles)
        ]

    def cycle_angle(self, path: Sequence[Tuple[int, int]]) -> float:
        """Total rotation along a closed walk given as oriented edges, in (-pi, pi]."""
        if not path:
            raise GraphError("Empty path is not a closed walk")
        total = 0.0
        for k, (s, t) in enumerate(path):
            next_source = path[(k + 1) % len(path)][0]
            if t != next_source:
                raise GraphError(
                    f"Path is not closed: edge ({s}, {t}) is followed by an edge leaving {next_source}"
                )
            total += self.angle(s, t)
        return wrap_angle(total)

    @staticmethod
    def walk_edges(nodes: Sequence[int]) -> List[Tuple[int, int]]:
        """Oriented edges of the closed walk ``nodes[0] -> ... -> nodes[-1] -> nodes[0]``."""
        return [(nodes[k], nodes[(k + 1) % len(nodes)]) for k in range(len(nodes))]

    # Derived graphs

    def with_trivial_connection(self) -> "ConnectionGraph":
        """Same weights, every angle zero."""
        return ConnectionGraph.build(
            ((s, t, w, 0.0) for s, t, w, _ in self.edge_list()), n_nodes=self.n_nodes
        )

    def with_angles(self, angles: np.ndarray) -> "ConnectionGraph":
        """Same structure with new per-edge angles (build orientation)."""
        angles = np.asarray(angles, dtype=float)
        if angles.shape != (self.n_edges,):
            raise DimensionError(f"Expected {self.n_edges} angles, got shape {angles.shape}")
        return ConnectionGraph.build(
            ((s, t, w, a) for (s, t, w, _), a in zip(self.edge_list(), angles)),
            n_nodes=self.n_nodes,
        )

    def to_networkx(self) -> nx.Graph:
        """Undirected networkx view; edges carry ``weight``, ``theta`` and ``id``."""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n_nodes))
        for k, (s, t, w, theta) in enumerate(self.edge_list()):
            graph.add_edge(s, t, weight=w, theta=theta, source=s, id=k)
        return graph

    def is_connected(self) -> bool:
        if self.n_nodes == 0:
            return False
        return nx.is_connected(self.to_networkx())


@dataclass(frozen=True, eq=False)
class SmoothingProblem:
    """Regularization weights ``q_i`` bound to a connection graph."""

    graph: ConnectionGraph
    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        if q.shape[0] != self.graph.n_nodes:
            raise DimensionError(
                f"q has {q.shape[0]} entries but the graph has {self.graph.n_nodes} nodes"
            )
        if not np.all(np.isfinite(q)) or np.any(q < 0):
            raise GraphError("Regularization weights must be finite and nonnegative")
        if not np.any(q > 0):
            raise GraphError("At least one regularization weight must be positive")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @classmethod
    def uniform(cls, graph: ConnectionGraph, q: float) -> "SmoothingProblem":
        return cls(graph, np.full(graph.n_nodes, float(q)))

    @classmethod
    def normalized(cls, graph: ConnectionGraph, q: float) -> "SmoothingProblem":
        """Problem with ``Q = q D``, used for normalized-Laplacian smoothing."""
        if np.any(graph.degrees <= 0):
            isolated = int(np.flatnonzero(graph.degrees <= 0)[0])
            raise GraphError(f"Normalized smoothing needs positive degrees; node {isolated} is isolated")
        return cls(graph, float(q) * graph.degrees)

    @property
    def n_nodes(self) -> int:
        return self.graph.n_nodes

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.q == self.q[0]))

    @property
    def q_scalar(self) -> float:
        """The common value of ``q`` for uniform problems."""
        if not self.is_uniform:
            raise GraphError("Problem has heterogeneous regularization weights")
        return float(self.q[0])
