"""Complex node signals."""
import numpy as np
import numpy.typing as npt

from core.errors import DimensionError

ComplexSignal = npt.NDArray[np.complex128]


def as_signal(values: npt.ArrayLike, n_nodes: int, name: str = "signal") -> ComplexSignal:
    """Coerce to a 1-d complex128 array of length ``n_nodes``."""
    signal = np.asarray(values, dtype=np.complex128).reshape(-1)
    if signal.shape[0] != n_nodes:
        raise DimensionError(f"{name} has {signal.shape[0]} entries, expected {n_nodes}")
    return signal


def complex_normal(n: int, rng: np.random.Generator) -> ComplexSignal:
    """Standard circular complex Gaussian vector (unit variance per entry)."""
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)


def unit_phases(omega: npt.ArrayLike) -> ComplexSignal:
    """``exp(i omega)`` entrywise."""
    return np.exp(1j * np.asarray(omega, dtype=float))
