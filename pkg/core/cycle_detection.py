"""Counter-based detection of cycle closure on the current random walk.

The walk is stored as successor pointers (``next_node``). A node is *on the
path* if the current walk reached it and no discarded cycle has since removed
it. Both detectors answer that question in O(1) per step; they differ in how a
discarded cycle is invalidated.
"""
import logging
from abc import ABC, abstractmethod
from typing import List, Optional

logger = logging.getLogger(__name__)


class CycleDetector(ABC):
    """Interface used by the sampler once per walk step."""

    def __init__(self, n_nodes: int):
        self.n_nodes = n_nodes

    @property
    @abstractmethod
    def scheme(self) -> str:
        """Name of the counter scheme."""
        pass

    @abstractmethod
    def start_walk(self, start: int) -> None:
        """Begin a new walk at ``start`` (which is put on the path)."""
        pass

    @abstractmethod
    def visit(self, node: int) -> None:
        """Mark a node freshly reached by the walk as on the path."""
        pass

    @abstractmethod
    def on_path(self, node: int) -> bool:
        """Whether reaching ``node`` closes a cycle."""
        pass

    @abstractmethod
    def discard_cycle(self, closing: int, next_node: List[int]) -> None:
        """Remove the cycle through ``closing`` from the path; ``closing`` stays on it."""
        pass


class OneCounterDetector(CycleDetector):
    """A single global counter, bumped at every walk start.

    A node is on the path iff its stamp equals the current counter. Discarding
    a cycle re-stamps its nodes (except the closing node) to 0, which costs
    the cycle length.
    """

    def __init__(self, n_nodes: int):
        super().__init__(n_nodes)
        self._stamp = [0] * n_nodes
        self._counter = 0

    @property
    def scheme(self) -> str:
        return "one_counter"

    def start_walk(self, start: int) -> None:
        self._counter += 1
        self._stamp[start] = self._counter

    def visit(self, node: int) -> None:
        self._stamp[node] = self._counter

    def on_path(self, node: int) -> bool:
        return self._stamp[node] == self._counter

    def discard_cycle(self, closing: int, next_node: List[int]) -> None:
        stamp = self._stamp
        node = next_node[closing]
        while node != closing:
            stamp[node] = 0
            node = next_node[node]

    def mark_path(self, start: int, end: int, next_node: List[int]) -> None:
        """Stamp every node of the path ``start -> ... -> end`` as current."""
        node = start
        self._stamp[node] = self._counter
        while node != end:
            node = next_node[node]
            self._stamp[node] = self._counter


class MultiCounterDetector(CycleDetector):
    """Interval labels ``(id, val)`` with a per-id cap.

    ``val`` grows monotonically over a sample; every reached node is labelled
    with the active counter ``id`` and the next ``val``. A node is on the path
    iff ``val_v <= cap[id_v]``, where the active counter has an infinite cap.
    Discarding a cycle closed at ``u`` truncates ``cap[id_u]`` to ``val_u``,
    zeroes the caps of all live counters opened after ``id_u`` and opens a new
    counter. Invalidation never touches the cycle's nodes, so its cost does
    not depend on the cycle length.

    When ``id_limit`` counters have been opened within one sample the detector
    rebuilds the path once and delegates to a `OneCounterDetector`.
    """

    _INFINITE = float("inf")

    def __init__(self, n_nodes: int, id_limit: int = 1_000_000):
        super().__init__(n_nodes)
        self.id_limit = id_limit
        self._ids = [-1] * n_nodes
        self._vals = [0] * n_nodes
        self._cap: List[float] = []
        self._live: List[int] = []
        self._val = 0
        self._walk_start = -1
        self._fallback: Optional[OneCounterDetector] = None

    @property
    def scheme(self) -> str:
        return "multi_counter" if self._fallback is None else "multi_counter+one_counter"

    def _open_counter(self) -> None:
        self._cap.append(self._INFINITE)
        self._live.append(len(self._cap) - 1)

    def start_walk(self, start: int) -> None:
        if self._fallback is not None:
            self._fallback.start_walk(start)
            return
        if self._live:
            # the previous walk is now part of the forest; freeze its counters
            self._cap[self._live[-1]] = self._val
        self._live.clear()
        self._walk_start = start
        self._open_counter()
        self.visit(start)

    def visit(self, node: int) -> None:
        if self._fallback is not None:
            self._fallback.visit(node)
            return
        self._val += 1
        self._ids[node] = self._live[-1]
        self._vals[node] = self._val

    def on_path(self, node: int) -> bool:
        if self._fallback is not None:
            return self._fallback.on_path(node)
        label = self._ids[node]
        return label >= 0 and self._vals[node] <= self._cap[label]

    def discard_cycle(self, closing: int, next_node: List[int]) -> None:
        if self._fallback is not None:
            self._fallback.discard_cycle(closing, next_node)
            return
        if len(self._cap) >= self.id_limit:
            self._switch_to_one_counter(closing, next_node)
            return
        closing_id = self._ids[closing]
        live = self._live
        while live[-1] > closing_id:
            self._cap[live.pop()] = 0
        self._cap[closing_id] = self._vals[closing]
        self._open_counter()

    def _switch_to_one_counter(self, closing: int, next_node: List[int]) -> None:
        logger.warning(
            "Multi-counter detector opened %d counters in one sample; switching to one_counter",
            len(self._cap),
        )
        fallback = OneCounterDetector(self.n_nodes)
        fallback.start_walk(self._walk_start)
        # the path after erasure runs from the walk start to the closing node
        fallback.mark_path(self._walk_start, closing, next_node)
        self._fallback = fallback
