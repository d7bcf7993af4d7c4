import numpy as np
import pytest

from tests.graphs import k4, square, triangle, weighted_path


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def signal_rng():
    return np.random.default_rng(7)


@pytest.fixture
def coherent_triangle():
    """Holonomy 3 pi / 8."""
    return triangle(np.pi / 8)


@pytest.fixture
def incoherent_triangle():
    """Holonomy 3 pi / 4, cos < 0."""
    return triangle(np.pi / 4)


@pytest.fixture(params=["path", "triangle", "square", "k4"])
def small_graph(request):
    return {
        "path": weighted_path,
        "triangle": lambda: triangle(np.pi / 8),
        "square": square,
        "k4": k4,
    }[request.param]()
