import networkx as nx
import numpy as np
import pytest
from pytest import approx

from core.errors import GraphError
from core.operators import build_connection_laplacian
from core.synthetic import (
    add_noise,
    block_sizes,
    connectivity_mixture,
    gen_bandlimited,
    gen_connection,
    gen_dcsbm,
    gen_eps_graph,
    gen_er,
    gen_sbm,
    generate_preset,
    generate_skeleton,
    is_weakly_inconsistent,
    scaled_affinity,
)
from models.signal import complex_normal
from tests.graphs import triangle


def _assert_simple(skeleton):
    edges = skeleton.edges
    assert np.all(edges[:, 0] < edges[:, 1])
    assert len({tuple(e) for e in edges.tolist()}) == skeleton.n_edges
    assert edges.max() < skeleton.n_nodes


class TestGraphFamilies:
    def test_er_keeps_largest_component(self, rng):
        skeleton = gen_er(200, 8.0, rng)
        _assert_simple(skeleton)
        assert skeleton.n_nodes <= 200
        assert nx.is_connected(skeleton.to_networkx())
        assert skeleton.original_ids.shape == (skeleton.n_nodes,)

    def test_er_without_filtering(self, rng):
        skeleton = gen_er(300, 6.0, rng, keep_largest_component=False)
        assert skeleton.n_nodes == 300
        assert skeleton.mean_degree == approx(6.0, rel=0.2)

    def test_er_argument_checks(self, rng):
        with pytest.raises(GraphError):
            gen_er(1, 1.0, rng)
        with pytest.raises(GraphError):
            gen_er(10, 20.0, rng)

    def test_block_sizes(self):
        assert block_sizes(10, [0.5, 0.5]) == [5, 5]
        assert block_sizes(10, [1, 1, 1]) == [3, 3, 4]
        with pytest.raises(GraphError):
            block_sizes(10, [0.5, -0.5])

    def test_sbm_without_cross_edges(self, rng):
        skeleton = gen_sbm(40, [20, 20], [[20.0, 0.0], [0.0, 20.0]], rng, keep_largest_component=False)
        _assert_simple(skeleton)
        blocks = skeleton.blocks
        assert blocks.tolist() == [0] * 20 + [1] * 20
        assert np.all(blocks[skeleton.edges[:, 0]] == blocks[skeleton.edges[:, 1]])

    def test_sbm_rejects_bad_blocks(self, rng):
        with pytest.raises(GraphError):
            gen_sbm(10, [4, 4], [[1.0, 0.0], [0.0, 1.0]], rng)
        with pytest.raises(GraphError):
            gen_sbm(10, [5, 5], [[1.0, 2.0], [0.0, 1.0]], rng)
        with pytest.raises(GraphError):
            gen_sbm(10, [5, 5], [[0.0, 0.0], [0.0, 0.0]], rng)

    def test_connectivity_mixture(self, rng):
        mixture = {"means": [1.0, 50.0], "stds": [2.0, 5.0], "weights": [0.7, 0.3]}
        p = connectivity_mixture(mixture, 500, rng)
        assert p.shape == (500,)
        assert np.all(p > 0)
        assert p.mean() == approx(1.0)

    def test_dcsbm_produces_heavy_degrees(self, rng):
        n = 400
        p = connectivity_mixture({"means": [1.0, 10.0], "stds": [0.1, 1.0], "weights": [0.9, 0.1]}, n, rng)
        skeleton = gen_dcsbm(n, [200, 200], [[18.0, 2.0], [2.0, 18.0]], p, rng, keep_largest_component=False)
        _assert_simple(skeleton)
        degrees = skeleton.degrees
        heavy = p > 3.0
        assert degrees[heavy].mean() > 3 * degrees[~heavy].mean()

    def test_eps_graph(self, rng):
        skeleton = gen_eps_graph(150, 0.3, rng, keep_largest_component=False)
        _assert_simple(skeleton)
        assert skeleton.n_nodes == 150
        with pytest.raises(GraphError):
            gen_eps_graph(10, 0.0, rng)

    def test_eps_graph_without_edges(self, rng):
        skeleton = gen_eps_graph(2, 1e-9, rng)
        assert skeleton.n_nodes == 2
        assert skeleton.n_edges == 0
        assert skeleton.edges.shape == (0, 2)

    def test_eps_graph_with_large_radius_is_complete(self, rng):
        skeleton = gen_eps_graph(6, 2.0, rng)
        assert skeleton.n_edges == 15


class TestPresets:
    def test_scaled_affinity_hits_target(self):
        c = scaled_affinity([[36.0, 4.0], [4.0, 36.0]], [0.5, 0.5], 10.0)
        assert np.array([0.5, 0.5]) @ c @ np.array([0.5, 0.5]) == approx(10.0)
        assert scaled_affinity([[1.0]], [1.0], None).tolist() == [[1.0]]

    @pytest.mark.parametrize("name", ["er", "sbm", "dcsbm1", "eps"])
    def test_presets_generate_at_small_n(self, name, rng):
        skeleton = generate_preset(name, rng, n=300, **({"mean_degree": 10.0} if name == "er" else {}))
        _assert_simple(skeleton)
        assert 0 < skeleton.n_nodes <= 300

    def test_density_scale_raises_mean_degree(self):
        params = {"model": "er", "n": 400, "mean_degree": 5.0, "keep_largest_component": False}
        sparse = generate_skeleton(params, np.random.default_rng(1))
        dense = generate_skeleton(params, np.random.default_rng(1), density_scale=2.0)
        assert dense.mean_degree > 1.5 * sparse.mean_degree

    def test_skeleton_errors(self, rng):
        with pytest.raises(GraphError, match="Unknown graph model"):
            generate_skeleton({"model": "lattice"}, rng)
        with pytest.raises(GraphError, match="missing parameter"):
            generate_skeleton({"model": "er", "n": 20}, rng)
        with pytest.raises(GraphError):
            generate_skeleton({"model": "er", "n": 20, "mean_degree": 3.0}, rng, density_scale=0.0)

    def test_unknown_preset(self, rng):
        with pytest.raises(KeyError):
            generate_preset("ring", rng)


class TestConnections:
    def test_noiseless_connection_is_synchronizable(self, rng):
        skeleton = gen_er(60, 6.0, rng)
        instance = gen_connection(skeleton, 0.0, rng)
        residual = build_connection_laplacian(instance.graph).matvec(instance.x_true)
        assert np.linalg.norm(residual) < 1e-9
        assert instance.weakly_inconsistent
        assert np.abs(instance.x_true) == approx(np.ones(instance.graph.n_nodes))

    def test_angles_are_wrapped(self, rng):
        skeleton = gen_er(50, 6.0, rng)
        instance = gen_connection(skeleton, 2.0, rng)
        angles = instance.graph.angles
        assert np.all(angles > -np.pi) and np.all(angles <= np.pi)
        assert not instance.weakly_inconsistent

    def test_noise_bounded_by_eta(self, rng):
        skeleton = gen_er(50, 6.0, rng)
        eta = 0.2
        instance = gen_connection(skeleton, eta, rng)
        omega = instance.omega
        for s, t, _, theta in instance.graph.edge_list():
            deviation = np.angle(np.exp(1j * (theta - (omega[t] - omega[s]))))
            assert abs(deviation) <= eta + 1e-12

    def test_negative_eta(self, rng):
        with pytest.raises(GraphError):
            gen_connection(gen_er(10, 3.0, rng), -0.1, rng)

    def test_weak_inconsistency_on_triangles(self):
        assert is_weakly_inconsistent(triangle(np.pi / 8))
        assert not is_weakly_inconsistent(triangle(np.pi / 4))

    def test_weakly_inconsistent_flag_is_sound(self, rng):
        skeleton = gen_er(8, 4.0, rng)
        instance = gen_connection(skeleton, np.pi / (2 * skeleton.n_nodes), rng)
        assert instance.weakly_inconsistent
        assert is_weakly_inconsistent(instance.graph)


class TestSignals:
    def test_bandlimited_energy_stays_in_low_band(self, rng):
        skeleton = gen_er(40, 6.0, rng)
        graph = gen_connection(skeleton, 0.3, rng).graph
        bandwidth = 5
        f = gen_bandlimited(graph, bandwidth, rng)
        laplacian = build_connection_laplacian(graph)
        eigenvalues = np.linalg.eigvalsh(laplacian.dense())
        rayleigh = laplacian.quadratic_form(f) / np.vdot(f, f).real
        assert eigenvalues[0] - 1e-9 <= rayleigh <= eigenvalues[bandwidth - 1] + 1e-9

    def test_bandlimited_rejects_bad_bandwidth(self, rng):
        with pytest.raises(GraphError):
            gen_bandlimited(triangle(0.1), 0, rng)
        with pytest.raises(GraphError):
            gen_bandlimited(triangle(0.1), 4, rng)

    def test_infinite_snr_returns_a_copy(self, rng):
        f = complex_normal(5, rng)
        noisy = add_noise(f, np.inf, rng)
        assert noisy is not f
        assert np.array_equal(noisy, f)

    def test_noise_power_matches_snr(self, rng):
        n = 20_000
        f = np.ones(n, dtype=np.complex128)
        noisy = add_noise(f, 2.0, rng)
        assert np.mean(np.abs(noisy - f) ** 2) == approx(0.5, rel=0.05)

    def test_rejects_nonpositive_snr(self, rng):
        with pytest.raises(ValueError):
            add_noise(np.ones(3), 0.0, rng)
