"""Text formats: edge lists, complex signals and ground-truth phases."""
import csv
import logging
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
import numpy.typing as npt

from models.graph import ConnectionGraph
from .errors import DataFormatError, GraphError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

NODES_HEADER = "# nodes:"
SIGNAL_HEADER = ["node", "re", "im"]
OMEGA_HEADER = ["node", "omega"]


def _format(value: float) -> str:
    return repr(float(value)) if np.isfinite(value) else str(value)


# Edge lists

def write_edge_list(graph: ConnectionGraph, path: PathLike) -> None:
    """Write ``i j w theta`` lines preceded by a ``# nodes: N`` header."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        handle.write(f"{NODES_HEADER} {graph.n_nodes}\n")
        for s, t, w, theta in graph.edge_list():
            handle.write(f"{s} {t} {_format(w)} {_format(theta)}\n")
    logger.debug("Wrote %d edges to %s", graph.n_edges, path)


def _edge_lines(path: Path) -> Iterator[Tuple[int, str]]:
    with path.open("r", encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            yield number, line.strip()


def read_edge_list(path: PathLike, n_nodes: Optional[int] = None) -> ConnectionGraph:
    """Parse an edge-list file.

    Blank lines and lines starting with ``#`` are skipped, except a
    ``# nodes: N`` header which fixes the node count.

    Raises:
        DataFormatError: on malformed lines or an invalid graph, with the
            offending line number when one applies.
    """
    path = Path(path)
    if not path.exists():
        raise DataFormatError("File not found", path)
    edges: List[Tuple[int, int, float, float]] = []
    first_seen: Dict[Tuple[int, int], int] = {}
    for number, line in _edge_lines(path):
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith(NODES_HEADER) and n_nodes is None:
                try:
                    n_nodes = int(line[len(NODES_HEADER):].strip())
                except ValueError:
                    raise DataFormatError(f"Bad node-count header '{line}'", path, number) from None
            continue
        fields = line.split()
        if len(fields) != 4:
            raise DataFormatError(f"Expected 'i j w theta', got {len(fields)} fields", path, number)
        try:
            i, j = int(fields[0]), int(fields[1])
            w, theta = float(fields[2]), float(fields[3])
        except ValueError as exc:
            raise DataFormatError(f"Cannot parse edge: {exc}", path, number) from None
        if i == j:
            raise DataFormatError(f"Self-loop at node {i}", path, number)
        if i < 0 or j < 0:
            raise DataFormatError(f"Negative node id in edge ({i}, {j})", path, number)
        if not w > 0:
            raise DataFormatError(f"Edge ({i}, {j}) has nonpositive weight {w}", path, number)
        pair = (min(i, j), max(i, j))
        if pair in first_seen:
            raise DataFormatError(
                f"Duplicate edge ({i}, {j}); first given on line {first_seen[pair]}", path, number
            )
        first_seen[pair] = number
        edges.append((i, j, w, theta))

    try:
        graph = ConnectionGraph.build(edges, n_nodes=n_nodes)
    except GraphError as exc:
        raise DataFormatError(str(exc), path) from exc
    logger.debug("Read %d nodes, %d edges from %s", graph.n_nodes, graph.n_edges, path)
    return graph


# CSV signals

def _read_rows(path: Path, header: List[str]) -> Iterator[Tuple[int, List[str]]]:
    if not path.exists():
        raise DataFormatError("File not found", path)
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        first = next(reader, None)
        if first is None or [c.strip() for c in first] != header:
            raise DataFormatError(f"Expected header '{','.join(header)}'", path, 1)
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"Expected {len(header)} columns, got {len(row)}", path, reader.line_num
                )
            yield reader.line_num, row


def _collect(path: Path, header: List[str], n_nodes: Optional[int], parse) -> np.ndarray:
    values = {}
    for number, row in _read_rows(path, header):
        try:
            node = int(row[0])
            value = parse(row[1:])
        except ValueError as exc:
            raise DataFormatError(f"Cannot parse row: {exc}", path, number) from None
        if node < 0 or (n_nodes is not None and node >= n_nodes):
            raise DataFormatError(f"Node id {node} out of range", path, number)
        if node in values:
            raise DataFormatError(f"Duplicate node id {node}", path, number)
        values[node] = value
    size = n_nodes if n_nodes is not None else (max(values) + 1 if values else 0)
    if sorted(values) != list(range(size)):
        missing = sorted(set(range(size)) - set(values))
        raise DataFormatError(f"Missing values for nodes {missing[:5]}", path)
    return np.array([values[k] for k in range(size)])


def read_signal_csv(path: PathLike, n_nodes: Optional[int] = None) -> np.ndarray:
    """Read a ``node,re,im`` file into a complex vector."""
    return _collect(
        Path(path), SIGNAL_HEADER, n_nodes, lambda cells: complex(float(cells[0]), float(cells[1]))
    ).astype(np.complex128)


def write_signal_csv(signal: npt.ArrayLike, path: PathLike) -> None:
    signal = np.asarray(signal, dtype=np.complex128)
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SIGNAL_HEADER)
        for k, value in enumerate(signal):
            writer.writerow([k, _format(value.real), _format(value.imag)])


def read_omega_csv(path: PathLike, n_nodes: Optional[int] = None) -> np.ndarray:
    """Read a ``node,omega`` ground-truth file (radians)."""
    return _collect(Path(path), OMEGA_HEADER, n_nodes, lambda cells: float(cells[0])).astype(float)


def write_omega_csv(omega: npt.ArrayLike, path: PathLike) -> None:
    omega = np.asarray(omega, dtype=float)
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(OMEGA_HEADER)
        for k, value in enumerate(omega):
            writer.writerow([k, _format(value)])
