"""Graph-model presets for instance generation and benchmarks."""
import copy
from typing import Any, Dict


class GraphPresets:
    """Collection of graph-model presets.

    Block-model presets store the affinity matrix ``c_matrix`` at its reference
    values together with ``target_mean_degree``. At generation time the matrix
    is rescaled so that the expected mean degree hits the target at any ``n``;
    ``density_scale`` multiplies it afterwards.
    """

    ER = {
        "model": "er",
        "n": 1000,
        "mean_degree": 40.0,
    }

    SBM = {
        "model": "sbm",
        "n": 1000,
        "block_fractions": [0.5, 0.5],
        "c_matrix": [[36.0, 4.0], [4.0, 36.0]],
        "target_mean_degree": 40.0,
    }

    # Connectivity parameters p_i from a Gaussian mixture, normalized to mean 1
    DCSBM1 = {
        "model": "dcsbm",
        "n": 1000,
        "block_fractions": [0.5, 0.5],
        "c_matrix": [[36.0, 4.0], [4.0, 36.0]],
        "target_mean_degree": 40.0,
        "mixture": {
            "means": [50.0, 500.0, 10000.0],
            "stds": [20.0, 100.0, 100.0],
            "weights": [0.59, 0.4, 0.01],
        },
    }

    DCSBM2 = {
        "model": "dcsbm",
        "n": 1000,
        "block_fractions": [0.5, 0.5],
        "c_matrix": [[480.0, 20.0], [20.0, 480.0]],
        "target_mean_degree": 500.0,
        "mixture": {
            "means": [50.0, 1000.0, 5000.0, 10000.0],
            "stds": [20.0, 50.0, 100.0, 100.0],
            "weights": [0.45, 0.1, 0.44, 0.01],
        },
    }

    # Radius 0.1 at n = 10000, rescaled to keep the expected degree at n = 1000
    EPS = {
        "model": "eps",
        "n": 1000,
        "radius": 0.1 * 10.0 ** (1.0 / 3.0),
    }

    PRESETS: Dict[str, Dict[str, Any]] = {
        "er": ER,
        "sbm": SBM,
        "dcsbm1": DCSBM1,
        "dcsbm2": DCSBM2,
        "eps": EPS,
    }

    @staticmethod
    def names() -> list[str]:
        """Return the available preset names."""
        return sorted(GraphPresets.PRESETS)

    @staticmethod
    def get(name: str, **overrides: Any) -> Dict[str, Any]:
        """Return a copy of a preset with optional parameter overrides."""
        try:
            preset = copy.deepcopy(GraphPresets.PRESETS[name])
        except KeyError:
            raise KeyError(
                f"Unknown preset '{name}'. Available: {', '.join(GraphPresets.names())}"
            ) from None
        preset.update(overrides)
        return preset
