#!/usr/bin/env python3
"""
Lie algebra data and group charts

Structure constants are stored as ``c[alpha, mu, nu] = c^alpha_{mu nu}``.
Killing fields satisfy [K_alpha, K_beta] = c^gamma_{alpha beta} K_gamma with
the vector-field bracket [X, Y]^A = X^B d_B Y^A - Y^B d_B X^A.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Tuple

import numpy as np

from .calculus import evaluate_jet
from .checks import CheckReport
from .errors import ShapeError

logger = logging.getLogger(__name__)

STRUCTURE_TOLERANCE = 1e-12
BRACKET_TOLERANCE = 1e-8
CHART_TOLERANCE = 1e-12


def levi_civita() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k] = 1.0
        eps[i, k, j] = -1.0
    return eps


def _require_cubic(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.ndim != 3 or len(set(c.shape)) != 1:
        raise ShapeError(f"structure constants must be a cubic rank-3 array, got {c.shape}")
    return c


@dataclass(frozen=True, eq=False)
class LieData:
    """Structure constants of the symmetry algebra."""

    c: np.ndarray
    ad_invariant_form: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "c", _require_cubic(self.c))

    @property
    def dim_g(self) -> int:
        return self.c.shape[0]

    @property
    def abelian(self) -> bool:
        return not np.any(self.c)


@dataclass(frozen=True, eq=False)
class GroupChart:
    """Coordinates on the symmetry group near the identity."""

    dim_g: int
    compose: Callable[[np.ndarray, np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    identity: np.ndarray
    exp: Callable[[np.ndarray], np.ndarray]
    chart_domain: float

    def contains(self, a: np.ndarray) -> bool:
        return float(np.linalg.norm(a)) < self.chart_domain

    def round_trip_residuals(self, a: np.ndarray) -> Tuple[float, float]:
        """Residuals of a*a^-1 = e and (a^-1)^-1 = a."""
        a = np.asarray(a, dtype=float)
        product = self.compose(a, self.inverse(a))
        twice = self.inverse(self.inverse(a))
        return (
            float(np.max(np.abs(product - self.identity), initial=0.0)),
            float(np.max(np.abs(twice - a), initial=0.0)),
        )


def structure_residuals(c: np.ndarray) -> Tuple[float, float]:
    """Max antisymmetry and Jacobi residuals of ``c``."""
    c = _require_cubic(c)
    antisymmetry = c + np.transpose(c, (0, 2, 1))
    jacobi = (
        np.einsum("sij,rsk->rijk", c, c)
        + np.einsum("sjk,rsi->rijk", c, c)
        + np.einsum("ski,rsj->rijk", c, c)
    )
    return (
        float(np.max(np.abs(antisymmetry), initial=0.0)),
        float(np.max(np.abs(jacobi), initial=0.0)),
    )


def validate_lie_data(c: np.ndarray) -> CheckReport:
    antisymmetry, jacobi = structure_residuals(c)
    report = CheckReport()
    report.record("structure_antisymmetry", antisymmetry, STRUCTURE_TOLERANCE)
    report.record("structure_jacobi", jacobi, STRUCTURE_TOLERANCE)
    return report


def bracket_residual(
    killing: Callable, point: np.ndarray, c: np.ndarray
) -> np.ndarray:
    """[K_a, K_b]^A - c^g_{ab} K^A_g for a field map ``killing(point)``."""
    jet = evaluate_jet(killing, point)
    fields, derivative = jet.value, jet.jacobian
    if fields.size == 0:
        return np.zeros(0)
    # derivative[A, b, B] = d_B K^A_b
    transported = np.einsum("Ba,AbB->Aab", fields, derivative)
    bracket = transported - np.transpose(transported, (0, 2, 1))
    expected = np.einsum("gab,Ag->Aab", c, fields)
    return bracket - expected


def killing_consistency(
    model, sample_points: Iterable[Tuple[np.ndarray, np.ndarray]]
) -> CheckReport:
    """Check the bracket relation of the Killing fields on P and on V."""
    report = CheckReport()
    c = model.lie.c
    for Q, f in sample_points:
        report.record(
            "killing_bracket_P",
            bracket_residual(model.killing_P, Q, c),
            BRACKET_TOLERANCE,
            Q,
        )
        if model.n_V:
            report.record(
                "killing_bracket_V",
                bracket_residual(model.killing_V, f, c),
                BRACKET_TOLERANCE,
                f,
            )
    report.log_summary(f"killing consistency ({model.name})")
    return report


def chart_consistency(chart: GroupChart, elements: Iterable[np.ndarray]) -> CheckReport:
    report = CheckReport()
    for a in elements:
        product, twice = chart.round_trip_residuals(a)
        report.record("chart_inverse", product, CHART_TOLERANCE, a)
        report.record("chart_double_inverse", twice, CHART_TOLERANCE, a)
    report.record(
        "chart_exp_zero",
        chart.exp(np.zeros(chart.dim_g)) - chart.identity,
        CHART_TOLERANCE,
    )
    return report
