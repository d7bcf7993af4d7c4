"""Forest-based smoothing arms."""
import logging
from typing import List, Optional

import numpy as np

from core.estimators import (
    EstimatorKind,
    accumulate_forests,
    combine,
    estimate_gradient_step,
)
from core.operators import build_regularized
from core.sampler import MtsfSampler
from models.forest import Mtsf
from models.signal import ComplexSignal
from models.walk import WalkConfig
from .base import BaseSmoother, SmootherConfig, SmoothingResult

logger = logging.getLogger(__name__)


class MtsfSmoother(BaseSmoother):
    """Average of ``m`` per-forest estimates.

    With ``reuse_forests`` the first ``m`` forests are kept and every later
    call only re-evaluates the estimator on them.
    """

    ESTIMATORS = {
        "mtsf": EstimatorKind.TILDE,
        "mtsf_rb": EstimatorKind.RAO_BLACKWELL,
        "mtsf_gs": EstimatorKind.GRADIENT_STEP,
    }

    def __init__(self, problem, config: SmootherConfig):
        if config.method not in self.ESTIMATORS:
            raise ValueError(f"MtsfSmoother cannot run method '{config.method}'")
        super().__init__(problem, config)
        self.estimator = self.ESTIMATORS[config.method]
        options = {"mode": config.mode}
        if config.cycle_detection is not None:
            options["cycle_detection"] = config.cycle_detection
        self.walk_config = WalkConfig(**options)
        self._operator = (
            build_regularized(problem.graph, problem.q)
            if self.estimator == EstimatorKind.GRADIENT_STEP
            else None
        )
        self._forests: Optional[List[Mtsf]] = None

    @property
    def method_name(self) -> str:
        return self.config.method

    def _draw(self, rng: np.random.Generator) -> List[Mtsf]:
        if self.config.reuse_forests and self._forests is not None:
            return self._forests
        sampler = MtsfSampler(self.problem, self.walk_config, rng)
        forests = list(sampler.sample_many(self.config.m))
        logger.debug("Drew %d forests in %d successor draws", len(forests), sampler.total_steps)
        if self.config.reuse_forests:
            self._forests = forests
        return forests

    def _solve(self, g: ComplexSignal, rng: np.random.Generator) -> SmoothingResult:
        accumulator = accumulate_forests(self._draw(rng), g, self.problem, self.estimator)
        estimate = combine(accumulator)
        if self.estimator == EstimatorKind.GRADIENT_STEP:
            estimate = estimate_gradient_step(estimate, g, self.problem, self.config.alpha, self._operator)
        return self._result(estimate)
