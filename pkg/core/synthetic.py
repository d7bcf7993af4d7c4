"""Random graph families, noisy connections and band-limited test signals."""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import networkx as nx
import numpy as np
import numpy.typing as npt
import scipy.linalg

from config.presets import GraphPresets
from models.graph import ConnectionGraph, wrap_angles
from models.signal import ComplexSignal, complex_normal, unit_phases
from .errors import GraphError
from .operators import build_connection_laplacian, ensure_dense_size

logger = logging.getLogger(__name__)

# rows of the dense probability matrix handled at once by gen_dcsbm
DCSBM_CHUNK = 512


@dataclass
class GraphSkeleton:
    """Undirected simple graph on ``0..n_nodes-1`` with edges stored as ``(s, t)``, ``s < t``."""
    n_nodes: int
    edges: np.ndarray
    blocks: Optional[np.ndarray] = None
    original_ids: Optional[np.ndarray] = None

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_nodes).astype(float)

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.n_edges / self.n_nodes if self.n_nodes else 0.0

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n_nodes))
        graph.add_edges_from(map(tuple, self.edges.tolist()))
        return graph


def _seed(rng: np.random.Generator) -> int:
    """Integer seed for networkx generators, drawn from ``rng``."""
    return int(rng.integers(0, 2**32 - 1))


def _skeleton(graph: nx.Graph, blocks: Optional[np.ndarray], keep_largest_component: bool) -> GraphSkeleton:
    """Relabel ``graph`` to consecutive ids, optionally keeping only its largest component.

    Raises:
        GraphError: if nothing with an edge remains.
    """
    if keep_largest_component:
        graph = graph.copy()
        graph.remove_nodes_from(list(nx.isolates(graph)))
        if graph.number_of_nodes() == 0:
            raise GraphError("Generated graph has no edges")
        largest = max(nx.connected_components(graph), key=lambda c: (len(c), -min(c)))
        if len(largest) < graph.number_of_nodes():
            logger.info("Keeping largest component: %d of %d nodes", len(largest), graph.number_of_nodes())
        kept = np.array(sorted(largest), dtype=np.int64)
    else:
        kept = np.array(sorted(graph.nodes), dtype=np.int64)

    relabel = {int(old): new for new, old in enumerate(kept)}
    edges = sorted(
        (min(relabel[a], relabel[b]), max(relabel[a], relabel[b]))
        for a, b in graph.edges
        if a in relabel and b in relabel
    )
    return GraphSkeleton(
        n_nodes=len(kept),
        edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
        blocks=None if blocks is None else np.asarray(blocks)[kept],
        original_ids=kept,
    )


# Graph families

def gen_er(
    n: int, mean_degree: float, rng: np.random.Generator, keep_largest_component: bool = True
) -> GraphSkeleton:
    """Erdos-Renyi graph with edge probability ``mean_degree / (n - 1)``."""
    if n < 2:
        raise GraphError("Erdos-Renyi graphs need at least 2 nodes")
    if not 0 < mean_degree <= n - 1:
        raise GraphError(f"mean_degree must lie in (0, {n - 1}], got {mean_degree}")
    p = mean_degree / (n - 1)
    graph = nx.fast_gnp_random_graph(n, p, seed=_seed(rng))
    return _skeleton(graph, None, keep_largest_component)


def block_sizes(n: int, fractions: Sequence[float]) -> List[int]:
    """Split ``n`` nodes by ``fractions``; the last block takes the rounding remainder."""
    fractions = np.asarray(fractions, dtype=float)
    if fractions.ndim != 1 or fractions.size == 0 or np.any(fractions <= 0):
        raise GraphError("Block fractions must be a nonempty list of positive numbers")
    fractions = fractions / fractions.sum()
    sizes = [int(math.floor(f * n)) for f in fractions[:-1]]
    sizes.append(n - sum(sizes))
    return sizes


def _check_blocks(n: int, sizes: Sequence[int], c_matrix: npt.ArrayLike) -> np.ndarray:
    sizes = list(sizes)
    if any(int(s) != s or s <= 0 for s in sizes) or sum(sizes) != n:
        raise GraphError(f"Block sizes {sizes} must be positive integers summing to {n}")
    c = np.asarray(c_matrix, dtype=float)
    if c.shape != (len(sizes), len(sizes)):
        raise GraphError(f"Affinity matrix of shape {c.shape} does not match {len(sizes)} blocks")
    if not np.allclose(c, c.T) or np.any(c < 0):
        raise GraphError("Affinity matrix must be symmetric and nonnegative")
    if not np.any(c > 0):
        raise GraphError("Affinity matrix is zero; the graph would be empty")
    return c


def _block_labels(sizes: Sequence[int]) -> np.ndarray:
    return np.repeat(np.arange(len(sizes)), sizes)


def gen_sbm(
    n: int,
    sizes: Sequence[int],
    c_matrix: npt.ArrayLike,
    rng: np.random.Generator,
    keep_largest_component: bool = True,
) -> GraphSkeleton:
    """Stochastic block model with edge probability ``min(c_kl / n, 1)``."""
    c = _check_blocks(n, sizes, c_matrix)
    probabilities = np.minimum(c / n, 1.0)
    graph = nx.stochastic_block_model(
        [int(s) for s in sizes], probabilities.tolist(), seed=_seed(rng), sparse=True
    )
    return _skeleton(nx.Graph(graph), _block_labels(sizes), keep_largest_component)


def connectivity_mixture(
    mixture: Dict[str, Sequence[float]], n: int, rng: np.random.Generator
) -> np.ndarray:
    """Degree-correction parameters from a Gaussian mixture, normalized to mean 1.

    Negative draws are rejected and redrawn from the same component.
    """
    means = np.asarray(mixture["means"], dtype=float)
    stds = np.asarray(mixture["stds"], dtype=float)
    weights = np.asarray(mixture["weights"], dtype=float)
    if not (means.shape == stds.shape == weights.shape) or means.size == 0:
        raise GraphError("Mixture means, stds and weights must have the same nonzero length")
    if np.any(weights < 0) or weights.sum() <= 0 or np.any(stds < 0):
        raise GraphError("Mixture weights and stds must be nonnegative")
    components = rng.choice(means.size, size=n, p=weights / weights.sum())
    values = rng.normal(means[components], stds[components])
    negative = values <= 0
    while np.any(negative):
        values[negative] = rng.normal(means[components[negative]], stds[components[negative]])
        negative = values <= 0
    return values / values.mean()


def gen_dcsbm(
    n: int,
    sizes: Sequence[int],
    c_matrix: npt.ArrayLike,
    connectivity: npt.ArrayLike,
    rng: np.random.Generator,
    keep_largest_component: bool = True,
) -> GraphSkeleton:
    """Degree-corrected block model: edge ``{i, j}`` with probability ``min(p_i p_j c_kl / n, 1)``."""
    c = _check_blocks(n, sizes, c_matrix)
    p = np.asarray(connectivity, dtype=float)
    if p.shape != (n,) or np.any(p < 0):
        raise GraphError("Connectivity parameters must be n nonnegative numbers")
    labels = _block_labels(sizes)

    sources: List[np.ndarray] = []
    targets: List[np.ndarray] = []
    for start in range(0, n, DCSBM_CHUNK):
        stop = min(start + DCSBM_CHUNK, n)
        rows = np.arange(start, stop)
        probabilities = np.minimum(
            p[rows, None] * p[None, :] * c[labels[rows]][:, labels] / n, 1.0
        )
        upper = np.arange(n)[None, :] > rows[:, None]
        hits = (rng.random(probabilities.shape) < probabilities) & upper
        i, j = np.nonzero(hits)
        sources.append(rows[i])
        targets.append(j)

    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    graph.add_edges_from(zip(np.concatenate(sources).tolist(), np.concatenate(targets).tolist()))
    return _skeleton(graph, labels, keep_largest_component)


def gen_eps_graph(
    n: int, radius: float, rng: np.random.Generator, keep_largest_component: bool = True
) -> GraphSkeleton:
    """Geometric graph on ``n`` uniform points of the unit cube.

    A draw without any edge is returned as ``n`` isolated nodes.
    """
    if radius <= 0:
        raise GraphError("radius must be positive")
    graph = nx.random_geometric_graph(n, radius, dim=3, seed=_seed(rng))
    if graph.number_of_edges() == 0:
        logger.info("Geometric graph with radius %.3g has no edges", radius)
        return _skeleton(graph, None, False)
    return _skeleton(graph, None, keep_largest_component)


# Presets

def scaled_affinity(
    c_matrix: npt.ArrayLike, fractions: Sequence[float], target_mean_degree: Optional[float]
) -> np.ndarray:
    """Rescale ``c_matrix`` so the expected mean degree ``sum f_k f_l c_kl`` hits the target."""
    c = np.asarray(c_matrix, dtype=float)
    if target_mean_degree is None:
        return c
    f = np.asarray(fractions, dtype=float)
    f = f / f.sum()
    expected = float(f @ c @ f)
    return c * (target_mean_degree / expected)


def generate_skeleton(
    params: Dict[str, Any],
    rng: np.random.Generator,
    density_scale: float = 1.0,
) -> GraphSkeleton:
    """Instantiate a model description such as the ones in `GraphPresets`.

    ``density_scale`` multiplies the expected mean degree (the radius of
    geometric graphs is scaled by its cube root).
    """
    if density_scale <= 0:
        raise GraphError("density_scale must be positive")
    model = params.get("model")
    n = int(params.get("n", 1000))
    keep = bool(params.get("keep_largest_component", True))
    try:
        if model == "er":
            return gen_er(n, float(params["mean_degree"]) * density_scale, rng, keep)
        if model == "eps":
            return gen_eps_graph(n, float(params["radius"]) * density_scale ** (1.0 / 3.0), rng, keep)
        if model in ("sbm", "dcsbm"):
            fractions = params.get("block_fractions", [1.0])
            sizes = params.get("sizes") or block_sizes(n, fractions)
            c = scaled_affinity(params["c_matrix"], sizes, params.get("target_mean_degree")) * density_scale
            if model == "sbm":
                return gen_sbm(n, sizes, c, rng, keep)
            p = connectivity_mixture(params["mixture"], n, rng)
            return gen_dcsbm(n, sizes, c, p, rng, keep)
    except KeyError as exc:
        raise GraphError(f"Model '{model}' is missing parameter {exc}") from None
    raise GraphError(f"Unknown graph model '{model}'")


def generate_preset(
    name: str,
    rng: np.random.Generator,
    density_scale: float = 1.0,
    **overrides: Any,
) -> GraphSkeleton:
    return generate_skeleton(GraphPresets.get(name, **overrides), rng, density_scale)


# Connections and signals

@dataclass
class ConnectionInstance:
    """A connection graph with its ground-truth phases."""
    graph: ConnectionGraph
    omega: np.ndarray
    eta: float
    weakly_inconsistent: bool
    blocks: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def x_true(self) -> ComplexSignal:
        return unit_phases(self.omega)


def gen_connection(
    skeleton: GraphSkeleton,
    eta: float,
    rng: np.random.Generator,
) -> ConnectionInstance:
    """Angles ``theta_e = omega_t - omega_s + eta * eps_e`` with ``eps_e`` uniform in [-1, 1].

    ``weakly_inconsistent`` is set when ``eta <= pi / (2 n)``, which bounds
    every cycle's holonomy by ``pi / 2``.
    """
    if eta < 0:
        raise GraphError("eta must be nonnegative")
    n = skeleton.n_nodes
    omega = rng.uniform(0.0, 2.0 * np.pi, n)
    s, t = skeleton.edges[:, 0], skeleton.edges[:, 1]
    noise = rng.uniform(-1.0, 1.0, skeleton.n_edges)
    angles = wrap_angles(omega[t] - omega[s] + eta * noise)
    graph = ConnectionGraph.build(
        zip(s.tolist(), t.tolist(), np.ones(skeleton.n_edges).tolist(), angles.tolist()),
        n_nodes=n,
    )
    guaranteed = eta <= np.pi / (2.0 * n)
    logger.debug("Connection with eta=%.4g on %d nodes (weakly inconsistent: %s)", eta, n, guaranteed)
    return ConnectionInstance(graph, omega, eta, guaranteed, skeleton.blocks)


def is_weakly_inconsistent(graph: ConnectionGraph, atol: float = 1e-12) -> bool:
    """Exhaustive check that every simple cycle has ``cos(theta_C) >= 0``.

    Enumerates all simple cycles, so only meant for small graphs.
    """
    for cycle in nx.simple_cycles(graph.to_networkx()):
        if len(cycle) < 3:
            continue
        if math.cos(graph.cycle_angle(graph.walk_edges(cycle))) < -atol:
            return False
    return True


def gen_bandlimited(
    graph: ConnectionGraph,
    bandwidth: int,
    rng: np.random.Generator,
    dense_cap: Optional[int] = None,
) -> ComplexSignal:
    """``sum_{i <= B} a_i u_i`` over the bottom eigenvectors of ``L_theta``, ``a_i`` complex Gaussian."""
    n = graph.n_nodes
    if not 1 <= bandwidth <= n:
        raise GraphError(f"bandwidth must lie in [1, {n}], got {bandwidth}")
    ensure_dense_size(n, "gen_bandlimited", dense_cap)
    matrix = build_connection_laplacian(graph).matrix.toarray()
    _, vectors = scipy.linalg.eigh(matrix, subset_by_index=[0, bandwidth - 1])
    return vectors @ complex_normal(bandwidth, rng)


def add_noise(f: npt.ArrayLike, snr: float, rng: np.random.Generator) -> ComplexSignal:
    """Add circular Gaussian noise with ``||f||^2 / (n sigma^2) = snr``."""
    f = np.asarray(f, dtype=np.complex128)
    if snr <= 0:
        raise ValueError("snr must be positive")
    if math.isinf(snr):
        return f.copy()
    n = f.shape[0]
    sigma = np.sqrt(np.vdot(f, f).real / (n * snr))
    return f + sigma * complex_normal(n, rng)
