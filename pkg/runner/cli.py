#!/usr/bin/env python3
"""
Reduction engine command line
check | simulate | compare
"""

import argparse
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from reduction_engine import bundle
from reduction_engine.algebra import chart_consistency, killing_consistency, validate_lie_data
from reduction_engine.bundle import ModelSpec
from reduction_engine.calculus import fd_check
from reduction_engine.checks import CheckReport
from reduction_engine.christoffel import identity_suite
from reduction_engine.dynamics import (
    FullState,
    ReducedSystem,
    full_energy,
    full_vector_field,
    initial_lift,
    project_full_state,
)
from reduction_engine.errors import (
    DomainError,
    ModelNotFoundError,
    ParameterError,
    ShapeError,
    StiffnessError,
)
from reduction_engine.models import ambient_samples, instantiate, sample_points

from .config import ConfigError, RuntimeSettings, SimConfig, load_config
from .integrators import Trajectory, integrate
from .monitoring import StructuredLogger, export_metrics, record_report, setup_logging
from .output import write_json, write_report, write_trajectory

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFICATION = 2
EXIT_RUNTIME = 3

FD_POINTS = 50
FD_TOLERANCE = 1e-6


class UsageError(Exception):
    """Bad command-line usage."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--model", help="Built-in model name")
    common.add_argument("--config", help="TOML job file")
    common.add_argument("--t-final", dest="t_final", type=float, help="Integration horizon")
    common.add_argument("--dt", type=float, help="Output grid spacing / RK4 step")
    common.add_argument("--tol", type=float, help="RKF45 tolerance")
    common.add_argument("--seed", type=int, help="Sampling seed")
    common.add_argument("--samples", type=int, help="Sample points for check suites")
    common.add_argument("--output", help="Output file path")
    common.add_argument("--format", choices=["csv", "json"], help="Trajectory file format")
    common.add_argument("--workers", type=int, help="Threads for check")
    common.add_argument("--metrics-out", dest="metrics_out", help="Prometheus text output")

    parser = _Parser(description="Gauge-reduced mechanics engine")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    commands.add_parser("check", parents=[common], help="Run the identity and invariant suites")
    commands.add_parser("simulate", parents=[common], help="Integrate the reduced equations")
    commands.add_parser("compare", parents=[common], help="Reduced vs full-space integration")
    return parser


def _guarded(report: CheckReport, label: str, fn, *args) -> None:
    try:
        report.merge(fn(*args))
    except DomainError as exc:
        report.errors.append(f"{label}: {type(exc).__name__}: {exc}")


def _fd_checks(model: ModelSpec, points) -> CheckReport:
    report = CheckReport()
    for x, f_tilde in points[:FD_POINTS]:
        Q = np.asarray(model.section(x), dtype=float)
        maps = {
            "fd_section": (model.section, x, True),
            "fd_metric_P": (model.metric_P, Q, False),
            "fd_killing_P": (model.killing_P, Q, False),
            "fd_gauge": (model.gauge, Q, False),
        }
        if model.n_V:
            maps["fd_metric_V"] = (model.metric_V, f_tilde, False)
            maps["fd_killing_V"] = (model.killing_V, f_tilde, False)
        z = np.concatenate([Q, f_tilde])
        maps["fd_potential"] = (
            lambda w: model.potential(w[: model.n_P], w[model.n_P :]),
            z,
            True,
        )
        for name, (fn, point, second) in maps.items():
            report.merge(
                fd_check(fn, point, tolerance=FD_TOLERANCE, name=name, second_order=second)
            )
    return report


def run_check(config: SimConfig, model: ModelSpec) -> CheckReport:
    """Structure constants, Killing fields, chart, bundle invariants and identities."""
    rng = np.random.default_rng(config.seed)
    points = sample_points(model, config.samples, rng)
    report = validate_lie_data(model.lie.c)
    _guarded(report, "killing", killing_consistency, model, ambient_samples(model, config.samples, rng))
    elements = [model.chart.exp(rng.uniform(-1.0, 1.0, size=model.n_G)) for _ in range(config.samples)]
    report.merge(chart_consistency(model.chart, elements))

    def invariants(point):
        partial = CheckReport()
        _guarded(partial, "bundle", bundle.check_invariants, model, [point])
        return partial

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        for partial in pool.map(invariants, points):
            report.merge(partial)
    report.merge(identity_suite(model, points, workers=config.workers))
    _guarded(report, "finite differences", _fd_checks, model, points)
    report.log_summary(f"check ({model.name})")
    return report


def run_simulate(config: SimConfig, model: ModelSpec) -> Trajectory:
    state = config.initial_state(model)
    system = ReducedSystem(model)
    trajectory = integrate(
        system.rhs,
        state.to_vector(),
        config.dt,
        config.t_final,
        method=config.integrator,
        tol=config.tol,
        energy=system.energy,
        system="reduced",
    )
    E = trajectory.energies
    trajectory.metadata.update(
        {
            "model": model.name,
            "config": config.model_dump(mode="json"),
            "energy_drift": float(np.max(np.abs(E - E[0])) / max(1.0, abs(E[0]))),
        }
    )
    return trajectory


def run_compare(config: SimConfig, model: ModelSpec) -> Dict[str, Any]:
    """Integrate both descriptions from matched initial data and diff them."""
    state = config.initial_state(model)
    reduced = run_simulate(config, model)
    lifted = initial_lift(model, state)
    full = integrate(
        full_vector_field(model),
        lifted.to_vector(),
        config.dt,
        config.t_final,
        method=config.integrator,
        tol=config.tol,
        energy=lambda y: full_energy(model, FullState.from_vector(model, y)),
        system="full",
    )
    advisories: List[str] = []
    if full.truncated:
        advisories.append(f"full integration stopped at t={full.metadata['error']['time']}")

    projected: List[np.ndarray] = []
    rows = min(len(reduced.times), len(full.times))
    for row in range(rows):
        try:
            s = project_full_state(model, FullState.from_vector(model, full.states[row]))
        except DomainError as exc:
            advisories.append(f"projection left the chart at t={full.times[row]}: {exc}")
            break
        projected.append(s.to_vector())
    compared = len(projected)
    n_x, n_V = model.n_x, model.n_V
    if compared:
        diff = np.abs(reduced.states[:compared] - np.array(projected))
        max_dx = float(np.max(diff[:, :n_x], initial=0.0))
        max_df = float(np.max(diff[:, n_x : n_x + n_V], initial=0.0))
        max_dE = float(np.max(np.abs(reduced.energies[:compared] - full.energies[:compared])))
    else:
        max_dx = max_df = max_dE = float("inf")
    bounds = config.compare
    passed = max_dx <= bounds.max_dx and max_df <= bounds.max_df and max_dE <= bounds.max_dE
    return {
        "model": model.name,
        "rows_compared": compared,
        "compared_until": float(reduced.times[compared - 1]) if compared else 0.0,
        "max_dx": max_dx,
        "max_df": max_df,
        "max_dE": max_dE,
        "bounds": bounds.model_dump(),
        "passed": bool(passed),
        "advisories": advisories,
        "reduced": {
            "final_state": reduced.final_state.tolist(),
            "energy_drift": reduced.metadata["energy_drift"],
            "truncated": reduced.truncated,
        },
    }


def _execute(args: argparse.Namespace, log: StructuredLogger) -> int:
    overrides = {
        key: getattr(args, key)
        for key in ("model", "t_final", "dt", "tol", "seed", "samples", "output", "format", "workers")
    }
    config = load_config(args.config, overrides)
    model = instantiate(config.model, config.params)
    log.info("Command started", command=args.command, model=model.name)
    start = time.perf_counter()

    if args.command == "check":
        report = run_check(config, model)
        record_report(report)
        if config.output:
            write_report(report, config.output)
        log.info(
            "Check finished",
            passed=report.passed,
            failures=[entry.name for entry in report.failures()],
            errors=len(report.errors),
            duration=time.perf_counter() - start,
        )
        return EXIT_OK if report.passed else EXIT_VERIFICATION

    if args.command == "simulate":
        trajectory = run_simulate(config, model)
        if config.output:
            write_trajectory(trajectory, model, config.output, config.format)
        log.info(
            "Simulation finished",
            rows=len(trajectory.times),
            energy_drift=trajectory.metadata["energy_drift"],
            truncated=trajectory.truncated,
            duration=time.perf_counter() - start,
        )
        return EXIT_RUNTIME if trajectory.truncated else EXIT_OK

    result = run_compare(config, model)
    if config.output:
        write_json(result, config.output)
    log.info("Comparison finished", duration=time.perf_counter() - start, **{
        key: result[key] for key in ("max_dx", "max_df", "max_dE", "passed")
    })
    if result["reduced"]["truncated"]:
        return EXIT_RUNTIME
    return EXIT_OK if result["passed"] else EXIT_VERIFICATION


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = RuntimeSettings.from_env()
    setup_logging(settings.log_level, settings.log_format)
    log = StructuredLogger("runner")
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        logger.error(f"Usage error: {exc}")
        return EXIT_USAGE

    try:
        code = _execute(args, log)
    except (ConfigError, ValidationError, ParameterError, ModelNotFoundError, ShapeError) as exc:
        log.error("Configuration error", error=str(exc), kind=type(exc).__name__)
        code = EXIT_USAGE
    except (DomainError, StiffnessError) as exc:
        log.error("Runtime error", error=str(exc), kind=type(exc).__name__)
        code = EXIT_RUNTIME

    metrics_path = args.metrics_out or settings.metrics_path
    if metrics_path:
        export_metrics(metrics_path)
    return code


if __name__ == "__main__":
    sys.exit(main())
