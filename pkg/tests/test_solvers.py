import numpy as np
import pytest
from pytest import approx

from core.errors import CapacityError, SolverError
from core.operators import build_regularized
from core.solvers import (
    DenseSolver,
    approximation_error,
    optimal_q,
    q_grid,
    reconstruction_error,
    solve_cg,
    solve_exact,
)
from core.synthetic import add_noise, gen_bandlimited, gen_connection, gen_er
from models.graph import ConnectionGraph, SmoothingProblem
from models.signal import complex_normal
from tests.graphs import k4, triangle, weighted_path


def _dense_reference(problem, g):
    matrix = build_regularized(problem.graph, problem.q).dense()
    return np.linalg.solve(matrix, problem.q * g)


class TestExact:
    def test_matches_numpy(self, small_graph, signal_rng):
        problem = SmoothingProblem.uniform(small_graph, 0.4)
        g = complex_normal(small_graph.n_nodes, signal_rng)
        assert solve_exact(problem, g) == approx(_dense_reference(problem, g))

    def test_heterogeneous_q(self, signal_rng):
        problem = SmoothingProblem(k4(), np.array([0.0, 0.5, 2.0, 1.0]))
        g = complex_normal(4, signal_rng)
        assert solve_exact(problem, g) == approx(_dense_reference(problem, g))

    def test_solver_is_reusable(self, signal_rng):
        problem = SmoothingProblem.uniform(triangle(0.3), 1.0)
        solver = DenseSolver(problem)
        for _ in range(3):
            g = complex_normal(3, signal_rng)
            assert solver.solve(g) == approx(_dense_reference(problem, g))

    def test_dense_cap(self):
        with pytest.raises(CapacityError):
            solve_exact(SmoothingProblem.uniform(k4(), 1.0), np.ones(4), dense_cap=3)

    def test_singular_system_is_reported(self):
        # consistent connection on a component without any q
        graph = ConnectionGraph.build([(0, 1, 1.0, 0.0), (2, 3, 1.0, 0.0)])
        problem = SmoothingProblem(graph, np.array([1.0, 1.0, 0.0, 0.0]))
        with pytest.raises(SolverError):
            solve_exact(problem, np.ones(4))


class TestConjugateGradient:
    @pytest.mark.parametrize("preconditioner", ["none", "diagonal"])
    def test_converges_to_exact(self, preconditioner, signal_rng):
        problem = SmoothingProblem.uniform(k4(0.4), 0.3)
        g = complex_normal(4, signal_rng)
        result = solve_cg(problem, g, 50, preconditioner=preconditioner, tol=1e-13)
        assert result.converged
        assert not result.breakdown
        assert result.solution == approx(solve_exact(problem, g), abs=1e-9)

    def test_history_lengths(self, signal_rng):
        problem = SmoothingProblem.uniform(weighted_path(), 1.0)
        result = solve_cg(problem, complex_normal(3, signal_rng), 2)
        assert result.iterations == 2
        assert len(result.residual_norms) == len(result.elapsed) == 3

    def test_zero_residual_stops_immediately(self):
        # g in the kernel of L is a fixed point: (L + qI) g = q g
        problem = SmoothingProblem.uniform(k4(0.0), 1.0)
        result = solve_cg(problem, np.ones(4), 10)
        assert result.converged
        assert result.iterations == 0

    def test_rejects_bad_arguments(self):
        problem = SmoothingProblem.uniform(k4(), 1.0)
        with pytest.raises(ValueError):
            solve_cg(problem, np.ones(4), 0)
        with pytest.raises(ValueError, match="preconditioner"):
            solve_cg(problem, np.ones(4), 3, preconditioner="ilu")

    @pytest.mark.parametrize("preconditioner", ["none", "diagonal"])
    def test_energy_norm_error_never_increases(self, preconditioner, rng, signal_rng):
        instance = gen_connection(gen_er(60, 6.0, rng), 0.5, rng)
        problem = SmoothingProblem.uniform(instance.graph, 0.1)
        g = complex_normal(problem.n_nodes, signal_rng)
        f_star = solve_exact(problem, g)
        operator = build_regularized(problem.graph, problem.q)

        def energy_error(m):
            error = solve_cg(problem, g, m, preconditioner=preconditioner).solution - f_star
            return np.sqrt(max(operator.quadratic_form(error), 0.0))

        errors = [energy_error(m) for m in range(1, 16)]
        for before, after in zip(errors, errors[1:]):
            assert after <= before * (1 + 1e-8) + 1e-12

    @pytest.mark.slow
    def test_diagonal_preconditioner_helps_on_heavy_degrees(self):
        from core.synthetic import generate_preset

        rng = np.random.default_rng(17)
        plain, jacobi = [], []
        for _ in range(5):
            skeleton = generate_preset("dcsbm1", rng, n=500)
            graph = gen_connection(skeleton, np.pi / (2 * skeleton.n_nodes), rng).graph
            problem = SmoothingProblem.uniform(graph, 0.01 * graph.mean_degree)
            g = complex_normal(graph.n_nodes, rng)
            plain.append(solve_cg(problem, g, 2000, tol=1e-6).iterations)
            jacobi.append(solve_cg(problem, g, 2000, preconditioner="diagonal", tol=1e-6).iterations)
        assert np.median(jacobi) <= np.median(plain)


class TestMetrics:
    def test_errors_are_scaled_by_n(self):
        f = np.array([1.0, 1.0, 1.0, 1.0])
        assert approximation_error(f, np.zeros(4)) == approx(0.5)
        assert reconstruction_error(f, f) == 0.0


class TestQSelection:
    def test_grid_shape(self):
        grid = q_grid()
        assert grid.shape == (60,)
        assert np.diff(np.log(grid)) == approx(np.full(59, np.log(grid[1] / grid[0])))
        assert 0 < grid[0] and grid[-1] < 30.0

    def test_optimal_q_is_a_grid_point(self, rng):
        skeleton = gen_er(60, 8.0, rng)
        graph = gen_connection(skeleton, np.pi / (2 * skeleton.n_nodes), rng).graph
        f_true = gen_bandlimited(graph, 5, rng)
        g = add_noise(f_true, 1.0, rng)
        grid = q_grid(points=12)
        best = optimal_q(graph, g, f_true, grid)
        assert best in grid
        errors = [reconstruction_error(solve_exact(SmoothingProblem.uniform(graph, q), g), f_true) for q in grid]
        assert reconstruction_error(solve_exact(SmoothingProblem.uniform(graph, best), g), f_true) == min(errors)
