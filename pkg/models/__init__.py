from .graph import ConnectionGraph, SmoothingProblem, wrap_angle, wrap_angles
from .forest import Mtsf, NodeKind
from .walk import WalkConfig, SamplingMode, CycleDetection
from .signal import ComplexSignal, as_signal, complex_normal, unit_phases

__all__ = [
    "ConnectionGraph", "SmoothingProblem", "wrap_angle", "wrap_angles",
    "Mtsf", "NodeKind",
    "WalkConfig", "SamplingMode", "CycleDetection",
    "ComplexSignal", "as_signal", "complex_normal", "unit_phases",
]
