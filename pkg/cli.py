"""ForestSync command-line interface."""
import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from config.presets import GraphPresets
from config.settings import settings
from core.benchmark import BenchConfig, run_bench, write_bench_csv
from core.errors import CapacityError, ForestSyncError
from core.io import (
    read_edge_list,
    read_omega_csv,
    read_signal_csv,
    write_edge_list,
    write_omega_csv,
    write_signal_csv,
)
from core.operators import ensure_dense_size
from core.oracle import check_instance
from core.solvers import approximation_error, optimal_q, reconstruction_error, solve_exact
from core.synchronization import (
    power_iterate,
    power_iterate_adjacency,
    sync_error,
    sync_mst_baseline,
    sync_ust_baseline,
)
from core.synthetic import add_noise, gen_bandlimited, gen_connection, generate_skeleton
from models.graph import SmoothingProblem
from models.signal import complex_normal, unit_phases
from models.walk import CycleDetection, SamplingMode
from smoothers import available_methods, create_smoother

logger = logging.getLogger("forestsync")

SYNC_METHODS = ["exact", "cg", "cg_diag", "mtsf_rb", "mtsf_gs", "ust", "mst", "adjacency"]


def setup_logging(verbose: bool = False):
    """Configure root logging from settings."""
    level = logging.DEBUG if verbose or settings.debug else settings.log_level
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def _emit(record: Dict[str, Any]) -> None:
    print(json.dumps(record, sort_keys=True))


def _parse_param(text: str) -> tuple:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got '{text}'")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _q_value(text: str):
    if text == "auto":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"q must be a positive number or 'auto', got '{text}'") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("q must be positive")
    return value


# generate

def cmd_generate(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    overrides = dict(args.param or [])
    if args.n is not None:
        overrides["n"] = args.n
    if args.preset:
        params = GraphPresets.get(args.preset, **overrides)
    else:
        params = {"model": args.model, **overrides}
    skeleton = generate_skeleton(params, rng, args.density_scale)
    eta = args.eta if args.eta is not None else math.pi / (2.0 * skeleton.n_nodes)
    instance = gen_connection(skeleton, eta, rng)

    out = Path(args.out)
    write_edge_list(instance.graph, out)
    omega_out = Path(args.omega_out) if args.omega_out else out.with_name("omega.csv")
    write_omega_csv(instance.omega, omega_out)

    record: Dict[str, Any] = {
        "command": "generate",
        "model": params.get("model"),
        "n_nodes": instance.graph.n_nodes,
        "n_edges": instance.graph.n_edges,
        "mean_degree": instance.graph.mean_degree,
        "eta": eta,
        "weakly_inconsistent": instance.weakly_inconsistent,
        "graph": str(out),
        "omega": str(omega_out),
    }
    if args.bandwidth is not None:
        f_true = gen_bandlimited(instance.graph, args.bandwidth, rng)
        g = add_noise(f_true, args.snr, rng)
        stem = out.with_suffix("")
        signal_path = stem.with_name(stem.name + ".signal.csv")
        truth_path = stem.with_name(stem.name + ".truth.csv")
        write_signal_csv(g, signal_path)
        write_signal_csv(f_true, truth_path)
        record.update(signal=str(signal_path), truth=str(truth_path), snr=args.snr)
    logger.info("Generated %d nodes, %d edges", instance.graph.n_nodes, instance.graph.n_edges)
    _emit(record)
    return 0


# smooth

def cmd_smooth(args: argparse.Namespace) -> int:
    graph = read_edge_list(args.graph)
    g = read_signal_csv(args.signal, graph.n_nodes)
    f_true = read_signal_csv(args.truth, graph.n_nodes) if args.truth else None

    q = args.q
    if q == "auto":
        if f_true is None:
            raise ForestSyncError("--q auto needs --truth")
        q = optimal_q(graph, g, f_true)
    problem = SmoothingProblem.uniform(graph, q)
    smoother = create_smoother(
        problem,
        args.method,
        m=args.m,
        alpha=args.alpha,
        mode=SamplingMode(args.mode),
        cycle_detection=CycleDetection(args.detection) if args.detection else None,
    )
    result = smoother.smooth(g, np.random.default_rng(args.seed))
    if not result.success:
        raise ForestSyncError(result.error_message)

    record: Dict[str, Any] = {
        "command": "smooth",
        "method": args.method,
        "m": args.m,
        "q": q,
        "wall_ms": result.wall_time * 1e3,
        "converged": result.converged,
    }
    try:
        ensure_dense_size(graph.n_nodes, "approximation error")
        record["e_a"] = approximation_error(result.solution, solve_exact(problem, g))
    except CapacityError as exc:
        logger.warning("Skipping e_a: %s", exc)
    if f_true is not None:
        record["e_r"] = reconstruction_error(result.solution, f_true)
    if args.out:
        write_signal_csv(result.solution, args.out)
    _emit(record)
    return 0


# sync

def cmd_sync(args: argparse.Namespace) -> int:
    graph = read_edge_list(args.graph)
    x_true = unit_phases(read_omega_csv(args.truth, graph.n_nodes)) if args.truth else None
    q = args.q if args.q is not None else settings.sync_q_factor * graph.mean_degree
    problem = SmoothingProblem.uniform(graph, q)
    rng = np.random.default_rng(args.seed)

    record: Dict[str, Any] = {"command": "sync", "smoother": args.smoother, "q": q}
    started = time.perf_counter()
    history: Optional[List[Dict[str, Any]]] = None
    if args.smoother == "ust":
        estimate = sync_ust_baseline(problem, rng)
    elif args.smoother == "mst":
        estimate = sync_mst_baseline(problem)
    else:
        if args.smoother == "adjacency":
            result = power_iterate_adjacency(graph, args.k, rng=rng, x_true=x_true)
        else:
            smoother = create_smoother(
                problem,
                args.smoother,
                m=args.m,
                normalized=args.normalized,
                alpha=args.alpha,
                mode=SamplingMode(args.mode),
                cycle_detection=CycleDetection(args.detection) if args.detection else None,
                reuse_forests=args.reuse_forests,
            )
            result = power_iterate(
                problem, smoother, args.k, rng=rng, componentwise=args.componentwise, x_true=x_true
            )
        estimate = np.sqrt(graph.n_nodes) * result.f
        history = [
            {
                "k": entry.k,
                "wall_ms": entry.wall_time * 1e3,
                "rayleigh": entry.rayleigh,
                "e_s": entry.sync_error,
            }
            for entry in result.history
        ]
        record.update(m=args.m, k=args.k)
    record["wall_ms"] = (time.perf_counter() - started) * 1e3
    if x_true is not None:
        record["e_s"] = sync_error(estimate, x_true)
    if history is not None:
        record["history"] = history
    if args.out:
        write_signal_csv(estimate, args.out)
    _emit(record)
    return 0


# bench

def cmd_bench(args: argparse.Namespace) -> int:
    config = BenchConfig.load(args.config)
    rows = run_bench(config)
    out = Path(args.out) if args.out else settings.results_dir / "bench.csv"
    write_bench_csv(rows, out)
    logger.info("Wrote %d rows to %s", len(rows), out)
    return 0


# oracle-check

def cmd_oracle_check(args: argparse.Namespace) -> int:
    graph = read_edge_list(args.graph)
    problem = SmoothingProblem.uniform(graph, args.q)
    if args.signal:
        g = read_signal_csv(args.signal, graph.n_nodes)
    else:
        g = complex_normal(graph.n_nodes, np.random.default_rng(args.seed))
    report = check_instance(problem, g, tolerance=args.tolerance)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0 if report.passed else 1


# Parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forestsync", description=f"{settings.app_name} {settings.app_version}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--verbose", action="store_true", help="Enable debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    walk = argparse.ArgumentParser(add_help=False)
    walk.add_argument("--mode", choices=[m.value for m in SamplingMode], default=SamplingMode.EXACT.value)
    walk.add_argument("--detection", choices=[d.value for d in CycleDetection], default=None)
    walk.add_argument("--alpha", type=float, default=None, help="Control-variate step for mtsf_gs")

    gen = sub.add_parser("generate", parents=[common], help="Generate a connection graph")
    source = gen.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", choices=GraphPresets.names())
    source.add_argument("--model", choices=["er", "sbm", "dcsbm", "eps"])
    gen.add_argument("--param", type=_parse_param, action="append", help="Model parameter key=value")
    gen.add_argument("--n", type=int, default=None)
    gen.add_argument("--density-scale", type=float, default=1.0)
    gen.add_argument("--eta", type=float, default=None, help="Angle noise (default pi / (2n))")
    gen.add_argument("--bandwidth", type=int, default=None, help="Also write a band-limited signal")
    gen.add_argument("--snr", type=float, default=settings.default_snr)
    gen.add_argument("--omega-out", default=None)
    gen.add_argument("--out", required=True)
    gen.set_defaults(handler=cmd_generate)

    smooth = sub.add_parser("smooth", parents=[common, walk], help="Smooth a signal")
    smooth.add_argument("graph")
    smooth.add_argument("signal")
    smooth.add_argument("--q", type=_q_value, default=1.0)
    smooth.add_argument("--method", choices=available_methods(), default="mtsf_gs")
    smooth.add_argument("--m", type=int, default=10)
    smooth.add_argument("--truth", default=None, help="Clean signal CSV for e_r")
    smooth.add_argument("--out", default=None)
    smooth.set_defaults(handler=cmd_smooth)

    sync = sub.add_parser("sync", parents=[common, walk], help="Angular synchronization")
    sync.add_argument("graph")
    sync.add_argument("--q", type=float, default=None, help="Default: sync_q_factor * mean degree")
    sync.add_argument("--smoother", choices=SYNC_METHODS, default="mtsf_rb")
    sync.add_argument("--m", type=int, default=3)
    sync.add_argument("--k", type=int, default=50)
    sync.add_argument("--truth", default=None, help="Ground-truth omega CSV")
    sync.add_argument("--componentwise", action="store_true")
    sync.add_argument("--reuse-forests", action="store_true")
    sync.add_argument("--normalized", action="store_true")
    sync.add_argument("--out", default=None)
    sync.set_defaults(handler=cmd_sync)

    bench = sub.add_parser("bench", parents=[common], help="Run a benchmark config")
    bench.add_argument("config")
    bench.add_argument("--out", default=None)
    bench.set_defaults(handler=cmd_bench)

    oracle = sub.add_parser("oracle-check", parents=[common], help="Exact identity checks on a tiny graph")
    oracle.add_argument("graph")
    oracle.add_argument("--q", type=float, default=1.0)
    oracle.add_argument("--signal", default=None)
    oracle.add_argument("--tolerance", type=float, default=1e-8)
    oracle.set_defaults(handler=cmd_oracle_check)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)
    try:
        return args.handler(args)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "config"
        print(f"error: {location}: {first['msg']}", file=sys.stderr)
        return 2
    except (ForestSyncError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
