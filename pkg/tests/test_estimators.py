import numpy as np
import pytest
from pytest import approx

from core.errors import DimensionError, GraphError
from core.estimators import (
    EstimateAccumulator,
    EstimatorKind,
    combine,
    estimate_dof,
    estimate_gradient_step,
    estimate_rao_blackwell,
    estimate_tilde,
    feynman_kac_point,
    mtsf_estimate,
    ratio_standard_error,
    smooth_normalized,
)
from core.operators import build_connection_laplacian
from core.oracle import build_forest, exact_estimator_second_moment
from core.sampler import MtsfSampler
from core.solvers import solve_exact
from models.graph import ConnectionGraph, SmoothingProblem
from models.signal import complex_normal
from models.walk import SamplingMode, WalkConfig
from tests.graphs import k2, k4, square, triangle, weighted_path


@pytest.fixture
def g4(signal_rng):
    return complex_normal(4, signal_rng)


class TestPerForest:
    def test_tilde_propagates_root_value(self):
        graph = weighted_path()
        forest = build_forest(graph, [0], [(0, 1), (1, 2)])
        g = np.array([2.0 + 1.0j, 5.0, -3.0])
        estimate = estimate_tilde(forest, g)
        assert estimate == approx(g[0] * np.exp(1j * np.array([0.0, 0.5, -0.2])))

    def test_tilde_is_zero_on_unicycles(self):
        graph = ConnectionGraph.build([(0, 1, 1.0, 0.3), (1, 2, 1.0, 0.3), (2, 0, 1.0, 0.3), (2, 3, 1.0, 0.0)])
        forest = build_forest(graph, [3], [(0, 1), (1, 2), (0, 2)])
        estimate = estimate_tilde(forest, np.ones(4))
        assert estimate.tolist() == [0, 0, 0, 1]

    def test_rao_blackwell_averages_in_root_frame(self):
        graph = weighted_path()
        forest = build_forest(graph, [1], [(0, 1), (1, 2)])
        g = np.array([1.0, 2.0j, -1.0])
        # root frame: psi_{j->r} g_j = exp(-i rot_j) g_j
        mean_at_root = np.mean(np.exp(-1j * forest.rotation) * g)
        expected = np.exp(1j * forest.rotation) * mean_at_root
        assert estimate_rao_blackwell(forest, g, 1.0) == approx(expected)

    def test_rao_blackwell_weights_by_q(self):
        forest = build_forest(k2(0.0), [0], [(0, 1)])
        estimate = estimate_rao_blackwell(forest, np.array([1.0, 0.0]), np.array([3.0, 1.0]))
        assert estimate == approx([0.75, 0.75])

    def test_rao_blackwell_without_q_uses_plain_average(self):
        forest = build_forest(weighted_path(), [1], [(0, 1), (1, 2)])
        g = np.array([1.0, 2.0j, -1.0])
        estimate = estimate_rao_blackwell(forest, g, np.zeros(3))
        assert np.all(np.isfinite(estimate))
        assert estimate == approx(estimate_rao_blackwell(forest, g, 1.0))

    @pytest.mark.parametrize("kind", list(EstimatorKind))
    def test_estimates_are_linear_in_g(self, kind, signal_rng):
        problem = SmoothingProblem(k4(), np.array([0.4, 1.5, 0.0, 2.0]))
        forest = MtsfSampler(problem, rng=np.random.default_rng(21)).sample()
        g1, g2 = complex_normal(4, signal_rng), complex_normal(4, signal_rng)
        a = 0.7 - 1.3j

        def estimate(g):
            if kind is EstimatorKind.TILDE:
                return estimate_tilde(forest, g)
            rb = estimate_rao_blackwell(forest, g, problem.q)
            if kind is EstimatorKind.RAO_BLACKWELL:
                return rb
            return estimate_gradient_step(rb, g, problem, alpha=1.0)

        assert estimate(a * g1 + g2) == approx(a * estimate(g1) + estimate(g2), abs=1e-12)

    def test_gradient_step_alpha_zero_is_identity(self, g4):
        problem = SmoothingProblem.uniform(k4(), 1.0)
        f = complex_normal(4, np.random.default_rng(1))
        assert estimate_gradient_step(f, g4, problem, alpha=0.0) == approx(f)

    def test_gradient_step_fixes_exact_solution(self, g4):
        problem = SmoothingProblem.uniform(k4(), 1.0)
        f_star = solve_exact(problem, g4)
        assert estimate_gradient_step(f_star, g4, problem, alpha=1.0) == approx(f_star)

    def test_gradient_step_needs_positive_diagonal(self):
        graph = ConnectionGraph.build([(0, 1, 1.0, 0.0)], n_nodes=3)
        problem = SmoothingProblem(graph, np.array([1.0, 0.0, 0.0]))
        with pytest.raises(GraphError, match="Preconditioner"):
            estimate_gradient_step(np.zeros(3), np.ones(3), problem)


class TestAccumulator:
    def test_mean_and_merge(self):
        left, right = EstimateAccumulator(2), EstimateAccumulator(2)
        left.add([1.0, 2.0])
        right.add([3.0, 4.0], weight=3.0)
        merged = left.merge(right)
        assert merged.m == 2
        assert combine(merged) == approx([2.5, 3.5])
        assert merged.effective_sample_size == approx(16.0 / 10.0)

    def test_rejects_empty_and_bad_shapes(self):
        accumulator = EstimateAccumulator(3)
        with pytest.raises(ValueError):
            accumulator.mean()
        with pytest.raises(DimensionError):
            accumulator.add(np.zeros(2))

    def test_ratio_standard_error_of_constant_rows(self):
        rows = np.tile(np.array([1.0 + 1j, 2.0]), (5, 1))
        assert ratio_standard_error(rows) == approx([0.0, 0.0])


class TestVarianceOrdering:
    @pytest.mark.parametrize("graph_factory", [lambda: triangle(np.pi / 8), square, k4])
    def test_gradient_step_beats_rao_blackwell_beats_tilde(self, graph_factory, signal_rng):
        graph = graph_factory()
        problem = SmoothingProblem.uniform(graph, 1.0)
        g = complex_normal(graph.n_nodes, signal_rng)
        tilde = exact_estimator_second_moment(problem, g, "tilde")
        rb = exact_estimator_second_moment(problem, g, "rb")
        gs = exact_estimator_second_moment(problem, g, "gs", alpha=1.0)
        assert rb <= tilde + 1e-12
        assert gs <= rb + 1e-12


class TestMonteCarlo:
    @pytest.mark.parametrize("kind", list(EstimatorKind))
    def test_mtsf_estimate_converges(self, kind, g4):
        problem = SmoothingProblem.uniform(k4(), 1.0)
        f_star = solve_exact(problem, g4)
        estimate = mtsf_estimate(problem, g4, 4000, kind, rng=np.random.default_rng(3))
        assert np.linalg.norm(estimate - f_star) <= 0.1 * np.linalg.norm(g4)

    def test_importance_estimate_on_incoherent_triangle(self, signal_rng):
        graph = triangle(np.pi / 4)
        problem = SmoothingProblem.uniform(graph, 0.5)
        g = complex_normal(3, signal_rng)
        f_star = solve_exact(problem, g)
        config = WalkConfig(mode=SamplingMode.IMPORTANCE)
        estimate = mtsf_estimate(problem, g, 20_000, "rb", config=config, rng=np.random.default_rng(4))
        assert np.linalg.norm(estimate - f_star) <= 0.05 * np.linalg.norm(g)

    def test_m_must_be_positive(self, g4):
        with pytest.raises(ValueError):
            mtsf_estimate(SmoothingProblem.uniform(k4(), 1.0), g4, 0)

    def test_smooth_normalized_matches_dense(self, g4):
        graph = k4()
        q = 0.7
        scale = np.diag(graph.degrees ** -0.5)
        normalized = scale @ build_connection_laplacian(graph).dense() @ scale
        expected = q * np.linalg.solve(normalized + q * np.eye(4), g4)
        estimate = smooth_normalized(graph, q, g4, 4000, "gs", rng=np.random.default_rng(5))
        assert np.linalg.norm(estimate - expected) <= 0.1 * np.linalg.norm(g4)


class TestFeynmanKac:
    @pytest.mark.parametrize(
        "graph, q, node",
        [
            (k2(0.3), 0.8, 0),
            (triangle(np.pi / 8), 0.8, 2),
            (triangle(np.pi / 4), 2.0, 0),
            (weighted_path(), 0.8, 1),
        ],
        ids=["k2", "triangle", "incoherent-triangle", "path"],
    )
    def test_point_estimate_within_five_standard_errors(self, graph, q, node, signal_rng):
        problem = SmoothingProblem.uniform(graph, q)
        g = complex_normal(graph.n_nodes, signal_rng)
        f_star = solve_exact(problem, g)
        m = 20_000
        estimate = feynman_kac_point(problem, g, node, m, rng=np.random.default_rng(6))
        # each walk returns |g_last|, so max |g| bounds the per-walk spread
        standard_error = np.abs(g).max() / np.sqrt(m)
        assert abs(estimate - f_star[node]) <= 5 * standard_error

    def test_random_graph(self, signal_rng):
        from core.synthetic import gen_connection, gen_er

        rng = np.random.default_rng(14)
        instance = gen_connection(gen_er(10, 4.0, rng, keep_largest_component=False), np.pi / 20, rng)
        graph = instance.graph
        problem = SmoothingProblem.uniform(graph, 0.5)
        g = complex_normal(graph.n_nodes, signal_rng)
        f_star = solve_exact(problem, g)
        node = int(np.argmax(graph.degrees))
        m = 20_000
        estimate = feynman_kac_point(problem, g, node, m, rng=np.random.default_rng(15))
        assert abs(estimate - f_star[node]) <= 5 * np.abs(g).max() / np.sqrt(m)

    def test_heterogeneous_q(self, signal_rng):
        problem = SmoothingProblem(weighted_path(), np.array([0.3, 1.0, 2.0]))
        g = complex_normal(3, signal_rng)
        f_star = solve_exact(problem, g)
        m = 20_000
        estimate = feynman_kac_point(problem, g, 0, m, rng=np.random.default_rng(2))
        assert abs(estimate - f_star[0]) <= 5 * np.abs(g).max() / np.sqrt(m)


class TestDegreesOfFreedom:
    @pytest.mark.parametrize(
        "graph, q",
        [
            (k2(), 1.0),
            (triangle(np.pi / 8), 1.0),
            (square(), 0.5),
            (weighted_path(), 2.0),
            (k4(), 0.3),
        ],
        ids=["k2", "triangle", "square", "path", "k4"],
    )
    def test_mean_root_count_matches_trace(self, graph, q):
        n = graph.n_nodes
        problem = SmoothingProblem.uniform(graph, q)
        laplacian = build_connection_laplacian(graph).dense()
        expected = np.trace(q * np.linalg.inv(laplacian + q * np.eye(n))).real
        m = 20_000
        estimate = estimate_dof(problem, m, rng=np.random.default_rng(10))
        # root counts lie in [0, n]
        assert estimate == approx(expected, abs=5 * n / 2 / np.sqrt(m))

    def test_importance_weighted_dof(self):
        graph = triangle(np.pi / 4)
        problem = SmoothingProblem.uniform(graph, 0.5)
        laplacian = build_connection_laplacian(graph).dense()
        expected = np.trace(0.5 * np.linalg.inv(laplacian + 0.5 * np.eye(3))).real
        config = WalkConfig(mode=SamplingMode.IMPORTANCE)
        estimate = estimate_dof(problem, 20_000, rng=np.random.default_rng(12), config=config)
        assert estimate == approx(expected, abs=0.1)


@pytest.mark.slow
def test_rao_blackwell_concentration():
    from core.synthetic import gen_connection, gen_er

    rng = np.random.default_rng(30)
    instance = gen_connection(gen_er(200, 6.0, rng), np.pi / 400, rng)
    problem = SmoothingProblem.uniform(instance.graph, 1.0)
    n = problem.n_nodes
    g = complex_normal(n, rng)
    f_star = solve_exact(problem, g)
    epsilon, delta = 0.3, 0.1
    m = int(np.ceil(6 / epsilon**2 * np.log(n / delta)))
    hits = sum(
        np.linalg.norm(mtsf_estimate(problem, g, m, "rb", rng=rng) - f_star) <= epsilon * np.linalg.norm(g)
        for _ in range(200)
    )
    assert hits >= 180
