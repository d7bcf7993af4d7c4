"""Runtime-precision benchmarks over smoothing and synchronization arms."""
import csv
import logging
import math
import threading
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveInt,
    ValidationInfo,
    field_validator,
    model_validator,
)

from config.settings import settings
from models.graph import ConnectionGraph, SmoothingProblem
from models.signal import unit_phases
from models.walk import CycleDetection, SamplingMode
from smoothers import available_methods, create_smoother
from .errors import CapacityError, ForestSyncError
from .io import read_edge_list, read_omega_csv
from .solvers import approximation_error, optimal_q, reconstruction_error, solve_exact
from .synchronization import (
    power_iterate,
    power_iterate_adjacency,
    sync_error,
    sync_mst_baseline,
    sync_ust_baseline,
)
from .synthetic import add_noise, gen_bandlimited, gen_connection, generate_preset, generate_skeleton

logger = logging.getLogger(__name__)

BENCH_HEADER = [
    "arm",
    "param",
    "value",
    "trials",
    "mean_wall_ms",
    "mean_error",
    "std_error",
    "mean_recon_error",
]

TREE_BASELINES = ("ust", "mst")


# Configuration

class GraphSpec(BaseModel):
    """Where the benchmark graph comes from: a preset, a model description or a file."""
    model_config = ConfigDict(extra="forbid")

    preset: Optional[str] = None
    params: Dict[str, object] = Field(default_factory=dict)
    path: Optional[str] = None
    truth: Optional[str] = None
    density_scale: float = Field(default=1.0, gt=0)
    eta: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _one_source(self) -> "GraphSpec":
        sources = [self.preset is not None, bool(self.params) and self.preset is None, self.path is not None]
        if sum(sources) != 1:
            raise ValueError("give exactly one of 'preset', 'params' (with a 'model' key) or 'path'")
        return self


class SignalSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    bandwidth: int = Field(default=10, ge=1)
    snr: float = Field(default_factory=lambda: settings.default_snr, gt=0)


class ArmSpec(BaseModel):
    """One solver arm swept over ``values``.

    For ``smooth`` arms the values are ``m`` (forests or CG iterations); for
    ``sync`` arms they are the power-iteration counts ``k`` and ``m`` is
    fixed per iteration. Tree baselines ignore ``values``.
    """
    model_config = ConfigDict(extra="forbid")

    task: Literal["smooth", "sync"] = "smooth"
    method: str
    values: List[PositiveInt] = Field(default_factory=lambda: list(settings.m_ladder), min_length=1)
    m: int = Field(default=1, ge=1)
    alpha: Optional[float] = None
    mode: SamplingMode = SamplingMode.EXACT
    cycle_detection: Optional[CycleDetection] = None
    normalized: bool = False
    label: Optional[str] = None

    @field_validator("method")
    @classmethod
    def _known_method(cls, method: str, info: ValidationInfo) -> str:
        task = info.data.get("task", "smooth")
        allowed = set(available_methods())
        if task == "sync":
            allowed |= set(TREE_BASELINES) | {"adjacency"}
        if method not in allowed:
            raise ValueError(f"'{method}' is not available for task '{task}'; choose from {sorted(allowed)}")
        return method

    @property
    def name(self) -> str:
        return self.label or self.method


class BenchConfig(BaseModel):
    """Benchmark description, usually loaded from JSON."""
    model_config = ConfigDict(extra="forbid")

    graph: GraphSpec
    arms: List[ArmSpec] = Field(min_length=1)
    signal: SignalSpec = Field(default_factory=SignalSpec)
    q: Optional[Union[float, Literal["auto"]]] = None
    trials: int = Field(default=1, ge=1)
    seed: int = 0
    workers: int = Field(default_factory=lambda: settings.bench_workers, ge=1)
    warmup: bool = True

    @classmethod
    def load(cls, path: Union[str, Path]) -> "BenchConfig":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))


# Timing ledger

@dataclass
class BenchRow:
    arm: str
    param: str
    value: int
    trials: int
    mean_wall_ms: float
    mean_error: float
    std_error: float
    mean_recon_error: Optional[float] = None

    def as_list(self) -> List[object]:
        recon = "" if self.mean_recon_error is None else self.mean_recon_error
        return [
            self.arm, self.param, self.value, self.trials,
            self.mean_wall_ms, self.mean_error, self.std_error, recon,
        ]


class TimingLedger:
    """Collects per-trial measurements keyed by (arm, param, value)."""

    def __init__(self):
        self._records: Dict[Tuple[str, str, int], List[Tuple[float, float, Optional[float]]]] = defaultdict(list)
        self._order: List[Tuple[str, str, int]] = []
        self._lock = threading.Lock()

    def record(self, arm: str, param: str, value: int, wall: float, error: float, recon: Optional[float] = None):
        """Record one trial (wall time in seconds)."""
        key = (arm, param, value)
        with self._lock:
            if key not in self._records:
                self._order.append(key)
            self._records[key].append((wall, error, recon))

    def get_usage(self, arm: str, param: str, value: int) -> List[Tuple[float, float, Optional[float]]]:
        with self._lock:
            return list(self._records.get((arm, param, value), []))

    def rows(self) -> List[BenchRow]:
        """One aggregated row per key, in first-recorded order."""
        with self._lock:
            keys = list(self._order)
        rows = []
        for key in keys:
            entries = self.get_usage(*key)
            walls = np.array([e[0] for e in entries])
            errors = np.array([e[1] for e in entries])
            recons = [e[2] for e in entries if e[2] is not None]
            rows.append(
                BenchRow(
                    arm=key[0],
                    param=key[1],
                    value=key[2],
                    trials=len(entries),
                    mean_wall_ms=float(walls.mean() * 1e3),
                    mean_error=float(errors.mean()),
                    std_error=float(errors.std(ddof=1)) if len(entries) > 1 else 0.0,
                    mean_recon_error=float(np.mean(recons)) if recons else None,
                )
            )
        return rows


# Instance preparation

@dataclass
class BenchInstance:
    graph: ConnectionGraph
    x_true: Optional[np.ndarray]
    f_true: np.ndarray
    g: np.ndarray


def load_instance(config: BenchConfig, rng: np.random.Generator) -> BenchInstance:
    source = config.graph
    x_true = None
    if source.path is not None:
        graph = read_edge_list(source.path)
        if source.truth is not None:
            x_true = unit_phases(read_omega_csv(source.truth, graph.n_nodes))
    else:
        if source.preset is not None:
            skeleton = generate_preset(source.preset, rng, source.density_scale, **source.params)
        else:
            skeleton = generate_skeleton(dict(source.params), rng, source.density_scale)
        eta = source.eta if source.eta is not None else math.pi / (2.0 * skeleton.n_nodes)
        instance = gen_connection(skeleton, eta, rng)
        graph, x_true = instance.graph, instance.x_true

    needs_signal = any(arm.task == "smooth" for arm in config.arms)
    if needs_signal:
        bandwidth = min(config.signal.bandwidth, graph.n_nodes)
        f_true = gen_bandlimited(graph, bandwidth, rng)
        g = add_noise(f_true, config.signal.snr, rng)
    else:
        f_true = g = np.zeros(graph.n_nodes, dtype=np.complex128)
    logger.info("Bench graph: %d nodes, %d edges, mean degree %.1f", graph.n_nodes, graph.n_edges, graph.mean_degree)
    return BenchInstance(graph, x_true, f_true, g)


def _resolve_q(config: BenchConfig, instance: BenchInstance, task: str) -> float:
    if isinstance(config.q, float):
        return config.q
    if task == "sync" and config.q is None:
        return settings.sync_q_factor * instance.graph.mean_degree
    return optimal_q(instance.graph, instance.g, instance.f_true)


# Trials

def _trial_rng(seed: int, arm_index: int, value: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, arm_index, value, trial]))


def _smooth_trial(arm: ArmSpec, problem: SmoothingProblem, instance: BenchInstance, f_star, value, rng):
    smoother = create_smoother(
        problem,
        arm.method,
        m=value,
        normalized=arm.normalized,
        alpha=arm.alpha,
        mode=arm.mode,
        cycle_detection=arm.cycle_detection,
    )
    result = smoother.smooth(instance.g, rng)
    if not result.success:
        raise ForestSyncError(result.error_message)
    error = approximation_error(result.solution, f_star) if f_star is not None else float("nan")
    return result.wall_time, error, reconstruction_error(result.solution, instance.f_true)


def _sync_trial(arm: ArmSpec, problem: SmoothingProblem, instance: BenchInstance, value, rng):
    x_true = instance.x_true
    started = time.perf_counter()
    if arm.method == "ust":
        estimate = sync_ust_baseline(problem, rng)
    elif arm.method == "mst":
        estimate = sync_mst_baseline(problem)
    elif arm.method == "adjacency":
        estimate = np.sqrt(problem.n_nodes) * power_iterate_adjacency(problem.graph, value, rng=rng).f
    else:
        smoother = create_smoother(
            problem,
            arm.method,
            m=arm.m,
            normalized=arm.normalized,
            alpha=arm.alpha,
            mode=arm.mode,
            cycle_detection=arm.cycle_detection,
        )
        estimate = np.sqrt(problem.n_nodes) * power_iterate(problem, smoother, value, rng=rng).f
    wall = time.perf_counter() - started
    error = sync_error(estimate, x_true) if x_true is not None else float("nan")
    return wall, error, None


def run_bench(config: BenchConfig) -> List[BenchRow]:
    """Run every arm over its values and trials; returns aggregated rows."""
    rng = np.random.default_rng(config.seed)
    instance = load_instance(config, rng)
    ledger = TimingLedger()

    f_star_cache: Dict[float, Optional[np.ndarray]] = {}
    q_by_task: Dict[str, float] = {}

    def exact_reference(problem: SmoothingProblem) -> Optional[np.ndarray]:
        q = float(problem.q[0])
        if q not in f_star_cache:
            try:
                f_star_cache[q] = solve_exact(problem, instance.g)
            except CapacityError as exc:
                logger.warning("Skipping approximation error: %s", exc)
                f_star_cache[q] = None
        return f_star_cache[q]

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        for arm_index, arm in enumerate(config.arms):
            if arm.task not in q_by_task:
                q_by_task[arm.task] = _resolve_q(config, instance, arm.task)
            q = q_by_task[arm.task]
            problem = SmoothingProblem.uniform(instance.graph, q)
            values = [0] if arm.method in TREE_BASELINES else arm.values
            param = "m" if arm.task == "smooth" else "k"
            f_star = exact_reference(problem) if arm.task == "smooth" else None
            logger.info("Arm %s (%s, q=%.4g): %s=%s", arm.name, arm.task, q, param, values)

            for value in values:
                def trial(index: int, arm=arm, value=value):
                    trial_rng = _trial_rng(config.seed, arm_index, value, index)
                    if arm.task == "smooth":
                        return _smooth_trial(arm, problem, instance, f_star, value, trial_rng)
                    return _sync_trial(arm, problem, instance, value, trial_rng)

                if config.warmup:
                    trial(config.trials)
                for wall, error, recon in pool.map(trial, range(config.trials)):
                    ledger.record(arm.name, param, value, wall, error, recon)

    return ledger.rows()


def write_bench_csv(rows: List[BenchRow], path: Union[str, Path]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(BENCH_HEADER)
        for row in rows:
            writer.writerow(row.as_list())
