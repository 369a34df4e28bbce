#!/usr/bin/env python3
"""
ODE integrators
Fixed-step RK4 and scipy's adaptive Runge-Kutta 4(5), both reporting on an
equal-interval grid.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from scipy.integrate import RK45

from reduction_engine.errors import DomainError, ParameterError, StiffnessError

from .monitoring import INTEGRATION_DURATION, INTEGRATION_STEPS, RHS_EVALUATIONS

logger = logging.getLogger(__name__)

RHS = Callable[[float, np.ndarray], np.ndarray]

MIN_STEP = 1e-12


@dataclass
class Trajectory:
    """Grid output of one integration run"""

    times: np.ndarray
    states: np.ndarray
    energies: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def truncated(self) -> bool:
        return "error" in self.metadata

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def output_grid(dt: float, t_final: float) -> np.ndarray:
    if not dt > 0 or not t_final > 0:
        raise ParameterError(f"dt and t_final must be positive (dt={dt}, t_final={t_final})")
    steps = int(np.ceil(t_final / dt - 1e-9))
    times = dt * np.arange(steps + 1)
    times[-1] = t_final
    return times


def rk4_step(rhs: RHS, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4(rhs: RHS, y0: np.ndarray, times: np.ndarray):
    y = np.asarray(y0, dtype=float)
    for t, t_next in zip(times[:-1], times[1:]):
        y = rk4_step(rhs, t, y, t_next - t)
        yield t_next, y


def rkf45(rhs: RHS, y0: np.ndarray, times: np.ndarray, tol: float):
    """Adaptive RK45 steps; grid rows come from each step's dense output.

    A step shorter than MIN_STEP before the end of the run is reported as
    stiffness, as is a solver failure.
    """
    solver = RK45(rhs, times[0], np.asarray(y0, dtype=float), times[-1], rtol=tol, atol=tol)
    pending = 1
    while pending < len(times):
        message = solver.step()
        if solver.status == "failed":
            raise StiffnessError(f"RK45 failed at t={solver.t:.6g}: {message}")
        if solver.status == "running" and solver.step_size < MIN_STEP:
            raise StiffnessError(f"step size {solver.step_size:.3e} underflow at t={solver.t:.6g}")
        dense = None
        while pending < len(times) and times[pending] <= solver.t:
            t_next = times[pending]
            if t_next == solver.t:
                y = solver.y.copy()
            else:
                if dense is None:
                    dense = solver.dense_output()
                y = dense(t_next)
            yield t_next, y
            pending += 1


def _counted(rhs: RHS, system: Optional[str]) -> RHS:
    if system is None:
        return rhs
    counter = RHS_EVALUATIONS.labels(system=system)

    def wrapped(t: float, y: np.ndarray) -> np.ndarray:
        counter.inc()
        return rhs(t, y)

    return wrapped


def integrate(
    rhs: RHS,
    state: np.ndarray,
    dt: float,
    t_final: float,
    method: str = "rk4",
    tol: float = 1e-10,
    energy: Optional[Callable[[np.ndarray], float]] = None,
    system: Optional[str] = None,
) -> Trajectory:
    """Integrate on the grid 0, dt, 2dt, ..., t_final.

    A DomainError raised mid-run ends the run early: the trajectory holds the
    rows computed so far and ``metadata["error"]`` describes the failure.
    """
    if method not in ("rk4", "rkf45"):
        raise ParameterError(f"unknown integrator '{method}'")
    if not tol > 0:
        raise ParameterError(f"tolerance must be positive, got {tol}")
    times = output_grid(dt, t_final)
    y0 = np.asarray(state, dtype=float)
    counted = _counted(rhs, system)
    energy_fn = energy or (lambda y: float("nan"))

    rows: List[np.ndarray] = [y0.copy()]
    stamps: List[float] = [0.0]
    energies: List[float] = [energy_fn(y0)]
    metadata: Dict[str, Any] = {"method": method, "dt": dt, "t_final": t_final}
    if method == "rkf45":
        metadata["tol"] = tol
    stepper = rk4(counted, y0, times) if method == "rk4" else rkf45(counted, y0, times, tol)

    start = time.perf_counter()
    try:
        for t, y in stepper:
            if not np.all(np.isfinite(y)):
                raise DomainError(f"non-finite state at t={t:.6g}")
            e = energy_fn(y)
            rows.append(y.copy())
            stamps.append(float(t))
            energies.append(e)
    except DomainError as exc:
        metadata["error"] = {
            "type": type(exc).__name__,
            "message": str(exc),
            "time": stamps[-1],
        }
        logger.warning(f"Integration stopped at t={stamps[-1]:.6g}: {exc}")
    finally:
        INTEGRATION_DURATION.labels(method=method).observe(time.perf_counter() - start)
    INTEGRATION_STEPS.labels(method=method).inc(len(rows) - 1)

    return Trajectory(
        times=np.array(stamps),
        states=np.array(rows),
        energies=np.array(energies),
        metadata=metadata,
    )


def richardson_ratio(rhs: RHS, y0: np.ndarray, t_final: float, dt: float) -> float:
    """|y_dt - y_dt/2| / |y_dt/2 - y_dt/4| for RK4; about 16 for a smooth problem."""
    finals = [
        integrate(rhs, y0, h, t_final, method="rk4").final_state for h in (dt, dt / 2, dt / 4)
    ]
    coarse = np.linalg.norm(finals[0] - finals[1])
    fine = np.linalg.norm(finals[1] - finals[2])
    return float(coarse / fine)
