"""Sparse Hermitian operators derived from a connection graph."""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt
import scipy.sparse as sp

from config.settings import settings
from models.graph import ConnectionGraph
from .errors import CapacityError, DimensionError, GraphError, SolverError

logger = logging.getLogger(__name__)


def ensure_dense_size(n: int, what: str, dense_cap: Optional[int] = None) -> None:
    """Raise `CapacityError` when a dense ``n x n`` computation is over the cap."""
    cap = settings.dense_cap if dense_cap is None else dense_cap
    if n > cap:
        raise CapacityError(
            f"{what} needs a dense {n}x{n} matrix, over the cap of {cap} (set FS_DENSE_CAP to raise it)"
        )


@dataclass(frozen=True, eq=False)
class ConnectionOperator:
    """Compressed sparse Hermitian operator of one of the supported kinds.

    Kinds: ``laplacian`` (L), ``regularized`` (L + Q), ``normalized``
    (D^-1/2 L D^-1/2) and ``adjacency`` (A).
    """

    matrix: sp.csr_matrix
    kind: str

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal().real

    def matvec(self, f: npt.ArrayLike, out: Optional[np.ndarray] = None) -> np.ndarray:
        return matvec(self, f, out)

    def quadratic_form(self, f: npt.ArrayLike) -> float:
        return quadratic_form(self, f)

    def dense(self, dense_cap: Optional[int] = None) -> np.ndarray:
        ensure_dense_size(self.n, f"dense {self.kind} operator", dense_cap)
        return self.matrix.toarray()


def _assemble(
    graph: ConnectionGraph,
    edge_values: np.ndarray,
    diagonal: np.ndarray,
    kind: str,
) -> ConnectionOperator:
    """Hermitian matrix from one value per stored edge (at ``(s, t)``) plus its conjugate."""
    n = graph.n_nodes
    upper = sp.coo_matrix(
        (edge_values, (graph.sources, graph.targets)), shape=(n, n), dtype=np.complex128
    ).tocsr()
    matrix = upper + upper.conj().T + sp.diags(diagonal.astype(np.complex128), format="csr")
    matrix = sp.csr_matrix(matrix)
    matrix.sort_indices()
    return ConnectionOperator(matrix=matrix, kind=kind)


def _edge_phases(graph: ConnectionGraph) -> np.ndarray:
    return np.exp(-1j * graph.angles)


def build_connection_laplacian(graph: ConnectionGraph) -> ConnectionOperator:
    """``L = D - A``, with off-diagonal ``(i, j) = -w exp(-i theta_(i,j))``."""
    values = -graph.weights * _edge_phases(graph)
    return _assemble(graph, values, graph.degrees.astype(float), "laplacian")


def build_regularized(graph: ConnectionGraph, q: npt.ArrayLike) -> ConnectionOperator:
    """``L + Q`` as its own operator."""
    q = np.broadcast_to(np.asarray(q, dtype=float), (graph.n_nodes,))
    values = -graph.weights * _edge_phases(graph)
    return _assemble(graph, values, graph.degrees + q, "regularized")


def build_normalized(graph: ConnectionGraph) -> ConnectionOperator:
    """``D^-1/2 L D^-1/2`` with unit diagonal.

    Raises:
        GraphError: if a node has zero degree.
    """
    if np.any(graph.degrees <= 0):
        isolated = int(np.flatnonzero(graph.degrees <= 0)[0])
        raise GraphError(f"Normalized Laplacian undefined: node {isolated} is isolated")
    scale = 1.0 / np.sqrt(graph.degrees[graph.sources] * graph.degrees[graph.targets])
    values = -(graph.weights * scale) * _edge_phases(graph)
    return _assemble(graph, values, np.ones(graph.n_nodes), "normalized")


def build_adjacency(graph: ConnectionGraph) -> ConnectionOperator:
    """``A`` with entries ``w exp(-i theta_(i,j))``; zero diagonal."""
    values = graph.weights * _edge_phases(graph)
    return _assemble(graph, values, np.zeros(graph.n_nodes), "adjacency")


def _check_length(op: ConnectionOperator, f: np.ndarray) -> None:
    if f.ndim != 1 or f.shape[0] != op.n:
        raise DimensionError(f"Signal of shape {f.shape} does not match operator of size {op.n}")


def matvec(op: ConnectionOperator, f: npt.ArrayLike, out: Optional[np.ndarray] = None) -> np.ndarray:
    """``y = op f``; writes into ``out`` when given."""
    f = np.asarray(f, dtype=np.complex128)
    _check_length(op, f)
    y = op.matrix @ f
    if out is None:
        return y
    out[...] = y
    return out


def quadratic_form(op: ConnectionOperator, f: npt.ArrayLike) -> float:
    """Real part of ``<f, op f>``.

    Raises:
        SolverError: if the imaginary residue exceeds ``1e-10 ||f||^2``.
    """
    f = np.asarray(f, dtype=np.complex128)
    _check_length(op, f)
    value = np.vdot(f, op.matrix @ f)
    scale = float(np.vdot(f, f).real)
    if abs(value.imag) > 1e-10 * max(scale, 1.0) * max(1.0, float(np.abs(op.diagonal).max(initial=0.0))):
        raise SolverError(f"Quadratic form has imaginary residue {value.imag:.3e}")
    return float(value.real)


def edge_incoherence(graph: ConnectionGraph, f: npt.ArrayLike) -> float:
    """``sum_e w_e |f(t) - exp(i theta_e) f(s)|^2`` over undirected edges."""
    f = np.asarray(f, dtype=np.complex128)
    diff = f[graph.targets] - np.exp(1j * graph.angles) * f[graph.sources]
    return float(np.sum(graph.weights * np.abs(diff) ** 2))


def lambda_extremes_bounds(graph: ConnectionGraph) -> Tuple[float, float]:
    """Bounds ``(1 + d_max, 2 d_max)`` on the largest eigenvalue.

    The lower bound assumes unit edge weights.
    """
    if graph.n_nodes == 0:
        raise GraphError("Empty graph has no spectrum")
    d_max = graph.max_degree
    return 1.0 + d_max, 2.0 * d_max
