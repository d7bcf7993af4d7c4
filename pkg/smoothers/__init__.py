"""Smoothing arms and their registry."""
from typing import Dict, Type

from models.graph import SmoothingProblem
from .base import BaseSmoother, SmootherConfig, SmoothingResult
from .conjugate_gradient import CgSmoother
from .dense import ExactSmoother
from .forest import MtsfSmoother
from .normalized import NormalizedSmoother

SMOOTHERS: Dict[str, Type[BaseSmoother]] = {
    "exact": ExactSmoother,
    "cg": CgSmoother,
    "cg_diag": CgSmoother,
    "mtsf": MtsfSmoother,
    "mtsf_rb": MtsfSmoother,
    "mtsf_gs": MtsfSmoother,
}


def available_methods() -> list[str]:
    return list(SMOOTHERS)


def create_smoother(
    problem: SmoothingProblem,
    method: str,
    m: int = 1,
    normalized: bool = False,
    **options,
) -> BaseSmoother:
    """Instantiate a smoothing arm by name.

    Args:
        problem: The problem to smooth on. With ``normalized`` it must be
            uniform; the arm then runs on ``Q = q D``.
        method: One of `available_methods()`.
        m: Forests (MTSF arms) or iterations (CG arms).
        **options: Remaining `SmootherConfig` fields.

    Raises:
        ValueError: for an unknown method.
    """
    if method not in SMOOTHERS:
        raise ValueError(f"Unknown method '{method}'; choose from {', '.join(SMOOTHERS)}")
    config = SmootherConfig(method=method, m=m, **options)

    def build(target: SmoothingProblem) -> BaseSmoother:
        return SMOOTHERS[method](target, config)

    if normalized:
        return NormalizedSmoother.wrap(problem, build)
    return build(problem)


__all__ = [
    "BaseSmoother",
    "SmootherConfig",
    "SmoothingResult",
    "ExactSmoother",
    "CgSmoother",
    "MtsfSmoother",
    "NormalizedSmoother",
    "SMOOTHERS",
    "available_methods",
    "create_smoother",
]
