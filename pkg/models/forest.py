"""Multi-type spanning forest data model."""
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import FrozenSet, List, Tuple

import numpy as np

from core.errors import GraphError
from .graph import ConnectionGraph, wrap_angle


class NodeKind(IntEnum):
    """Component type a node belongs to."""
    TREE = 0
    UNICYCLE = 1


ForestKey = Tuple[FrozenSet[int], FrozenSet[Tuple[int, int]]]


@dataclass(frozen=True, eq=False)
class Mtsf:
    """A spanning forest whose components are rooted trees or unicycles.

    Per node:
      - ``kind``: ``NodeKind`` of its component.
      - ``root``: root id for tree nodes, -1 for unicycle nodes.
      - ``parent``: next node towards the root (trees) or towards and around
        the cycle (unicycles); -1 for roots.
      - ``rotation``: for tree nodes the angle of the map carrying the root's
        value to the node; for unicycle nodes the angle from the cycle node
        where its branch meets the cycle (0 on the cycle itself).
      - ``on_cycle``: cycle membership.
    """

    kind: np.ndarray
    root: np.ndarray
    parent: np.ndarray
    rotation: np.ndarray
    on_cycle: np.ndarray
    cycle_angles: Tuple[float, ...] = ()
    log_weight: float = 0.0
    n_steps: int = 0
    _tree_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_tree_mask", self.kind == NodeKind.TREE)

    @property
    def n_nodes(self) -> int:
        return int(self.kind.shape[0])

    @property
    def tree_mask(self) -> np.ndarray:
        return self._tree_mask

    @property
    def roots(self) -> np.ndarray:
        return np.flatnonzero(self._tree_mask & (self.parent < 0))

    @property
    def n_roots(self) -> int:
        return int(np.count_nonzero(self._tree_mask & (self.parent < 0)))

    @property
    def n_unicycles(self) -> int:
        return len(self.cycle_angles)

    @property
    def importance_weight(self) -> float:
        return math.exp(self.log_weight)

    def edges(self) -> FrozenSet[Tuple[int, int]]:
        """Undirected edges as ``(min, max)`` pairs."""
        children = np.flatnonzero(self.parent >= 0)
        return frozenset(
            (int(min(c, p)), int(max(c, p))) for c, p in zip(children, self.parent[children])
        )

    def key(self) -> ForestKey:
        """Hashable identity: root set and edge set."""
        return frozenset(int(r) for r in self.roots), self.edges()

    def check(self, graph: ConnectionGraph, atol: float = 1e-9) -> None:
        """Validate the component taxonomy and the stored rotations.

        Raises:
            GraphError: if any structural invariant is violated.
        """
        n = graph.n_nodes
        if self.n_nodes != n:
            raise GraphError(f"Forest covers {self.n_nodes} nodes, graph has {n}")
        if len(self.edges()) + self.n_roots != n:
            raise GraphError("Edge count plus root count differs from node count")

        for i in range(n):
            p = int(self.parent[i])
            if p >= 0 and not graph.has_edge(p, i):
                raise GraphError(f"Parent link {i} -> {p} is not a graph edge")
            if self.kind[i] != NodeKind.TREE:
                continue
            # walk up to the root, accumulating edge angles
            node, total = i, 0.0
            for _ in range(n + 1):
                up = int(self.parent[node])
                if up < 0:
                    break
                if self.kind[up] != NodeKind.TREE:
                    raise GraphError(f"Tree node {node} points into a unicycle")
                total += graph.angle(up, node)
                node = up
            else:
                raise GraphError(f"Parent pointers from {i} do not reach a root")
            if node != self.root[i]:
                raise GraphError(f"Node {i} reaches root {node}, recorded {self.root[i]}")
            if abs(wrap_angle(total - self.rotation[i])) > atol:
                raise GraphError(f"Rotation of node {i} disagrees with its path to the root")

        for i in np.flatnonzero(self.on_cycle):
            if self.kind[i] != NodeKind.UNICYCLE or not self.on_cycle[self.parent[i]]:
                raise GraphError(f"Cycle node {i} is not linked around its cycle")

    def dump(self) -> str:
        """Text dump: ``i kind root parent rotation`` per node, then a trailer."""
        lines = []
        for i in range(self.n_nodes):
            kind = "tree" if self.kind[i] == NodeKind.TREE else ("cycle" if self.on_cycle[i] else "unicycle")
            lines.append(f"{i} {kind} {int(self.root[i])} {int(self.parent[i])} {float(self.rotation[i])!r}")
        lines.append("# cycles: " + " ".join(repr(float(a)) for a in self.cycle_angles))
        lines.append(f"# log_weight: {self.log_weight!r}")
        return "\n".join(lines) + "\n"


def forest_from_lists(
    kind: List[int],
    root: List[int],
    parent: List[int],
    rotation: List[float],
    on_cycle: List[bool],
    cycle_angles: List[float],
    log_weight: float = 0.0,
    n_steps: int = 0,
) -> Mtsf:
    """Freeze per-node Python lists into an `Mtsf`."""
    return Mtsf(
        kind=np.asarray(kind, dtype=np.int8),
        root=np.asarray(root, dtype=np.int64),
        parent=np.asarray(parent, dtype=np.int64),
        rotation=np.asarray(rotation, dtype=float),
        on_cycle=np.asarray(on_cycle, dtype=bool),
        cycle_angles=tuple(float(a) for a in cycle_angles),
        log_weight=float(log_weight),
        n_steps=int(n_steps),
    )
