"""Runtime configuration for ForestSync."""
from pathlib import Path
from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Settings read from the environment and an optional .env file."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        populate_by_name=True,
    )

    # App
    app_name: str = "ForestSync"
    app_version: str = "1.0.0"
    debug: bool = Field(default=False, alias="DEBUG")
    log_level: str = Field(default="INFO", alias="FS_LOG_LEVEL")

    # Size caps
    dense_cap: int = Field(default=4096, alias="FS_DENSE_CAP", ge=1)
    oracle_max_nodes: int = 8
    oracle_max_edges: int = 16

    # Sampler
    cycle_detection: Literal["one_counter", "multi_counter"] = Field(
        default="multi_counter", alias="FS_CYCLE_DETECTION"
    )
    multi_counter_cap: int = Field(default=1_000_000, alias="FS_MULTI_COUNTER_CAP", ge=2)
    uniform_block: int = Field(default=4096, ge=1)

    # Estimators and experiments
    default_alpha: float = 1.0
    m_ladder: list[int] = Field(default=[1, 2, 3, 5, 8, 13, 22, 36, 60, 100])
    q_grid_points: int = 60
    q_grid_upper: float = 30.0
    sync_q_factor: float = 1e-2
    default_snr: float = 2.0
    bench_workers: int = Field(default=1, alias="FS_BENCH_WORKERS", ge=1)

    @property
    def results_dir(self) -> Path:
        """Get the default results directory."""
        path = Path("results")
        path.mkdir(exist_ok=True)
        return path


# Global settings instance
settings = Settings()
