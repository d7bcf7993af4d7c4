"""Sampler configuration."""
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from config.settings import settings


class SamplingMode(str, Enum):
    """How closed cycles are accepted."""
    EXACT = "exact"
    IMPORTANCE = "importance"


class CycleDetection(str, Enum):
    """Counter scheme used to detect cycle closure on the current walk."""
    ONE_COUNTER = "one_counter"
    MULTI_COUNTER = "multi_counter"


class WalkConfig(BaseModel):
    """Configuration for the forest sampler.

    ``exact`` mode requires every cycle met to satisfy ``cos(theta_C) >= 0``;
    ``importance`` mode keeps such cycles unconditionally and records the
    compensating log-weight.
    """

    model_config = ConfigDict(frozen=True)

    mode: SamplingMode = SamplingMode.EXACT
    cycle_detection: CycleDetection = Field(
        default_factory=lambda: CycleDetection(settings.cycle_detection)
    )
    rng_seed: Optional[int] = None
    multi_counter_cap: int = Field(default_factory=lambda: settings.multi_counter_cap, ge=2)
    uniform_block: int = Field(default_factory=lambda: settings.uniform_block, ge=1)
