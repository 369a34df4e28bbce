#!/usr/bin/env python3
"""
Built-in models

abelian_disk   SO(2) rotating the punctured plane and a planar fiber.
so3_coupled    SO(3) x R^2 with shape-dependent inertia, a group/base coupling
               and a vector fiber rotated by SO(3).
flat_product   R translating one flat coordinate and a scalar fiber; every
               curvature and Christoffel term vanishes.
"""

import logging
import math
from typing import Any, Callable, Dict, Optional, Tuple, Type

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.spatial.transform import Rotation

from .algebra import GroupChart, LieData, levi_civita
from .bundle import ModelSpec
from .calculus import (
    Dual,
    arctan2,
    concatenate,
    cos,
    inv,
    matmul,
    polynomial,
    sin,
    sqrt,
    stack,
    total,
    transpose,
    value,
)
from .errors import DomainError, ModelNotFoundError, OutOfChartError, ParameterError

logger = logging.getLogger(__name__)


class ModelParams(BaseModel):
    """Named scalar parameters of a built-in model."""

    model_config = ConfigDict(extra="forbid", frozen=True)


class AbelianDiskParams(ModelParams):
    k: float = Field(1.0, gt=0, description="Spring constant of the potential")
    twist: float = Field(0.0, description="Section winds by angle twist * r**2")


class SO3CoupledParams(ModelParams):
    i1: float = Field(1.0, gt=0, description="Body inertia about axis 1")
    i2: float = Field(1.5, gt=0, description="Body inertia about axis 2")
    i3: float = Field(2.0, gt=0, description="Body inertia about axis 3")
    m: float = Field(0.5, ge=0, description="Shape dependence of the inertia")
    lam: float = Field(0.3, description="Group/base coupling strength")
    k1: float = Field(1.0, ge=0, description="Fiber stiffness")
    k2: float = Field(1.0, ge=0, description="Base stiffness")
    k3: float = Field(0.1, description="Base/fiber potential coupling")

    @model_validator(mode="after")
    def _coupled_metric_positive(self) -> "SO3CoupledParams":
        if self.lam**2 >= min(self.i1, self.i2):
            raise ValueError("lam**2 must be below i1 and i2 for a positive definite metric")
        return self


class FlatProductParams(ModelParams):
    k: float = Field(1.0, ge=0, description="Spring constant of the potential")
    fiber: bool = Field(True, description="Include the scalar fiber V = R")


def _rotation_2d(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def _wrap(angle: np.ndarray) -> np.ndarray:
    return (np.asarray(angle, dtype=float) + math.pi) % (2.0 * math.pi) - math.pi


def so2_chart() -> GroupChart:
    return GroupChart(
        dim_g=1,
        compose=lambda a, b: _wrap(np.asarray(a) + np.asarray(b)),
        inverse=lambda a: -np.asarray(a, dtype=float),
        identity=np.zeros(1),
        exp=_wrap,
        chart_domain=math.pi,
    )


def abelian_disk(params: AbelianDiskParams) -> ModelSpec:
    """With twist = 0 the section is the positive Q1 axis and x the radius.

    A non-zero twist bends the section into the spiral
    Q*(r) = r (cos(twist r^2), sin(twist r^2)); the gauge measures the polar
    angle after rotating back by twist |Q|^2, so x stays the radius.
    """
    k, twist = params.k, params.twist

    def rotation_field(v):
        return stack([-v[1], v[0]])[:, None]

    def gauge(Q):
        if float(np.hypot(*value(Q)[:2])) < 1e-12:
            raise DomainError("polar angle undefined at the origin")
        if not twist:
            return stack([arctan2(Q[1], Q[0])])
        phase = twist * total(Q * Q)
        c, s = cos(phase), sin(phase)
        return stack([arctan2(c * Q[1] - s * Q[0], c * Q[0] + s * Q[1])])

    def section(x):
        if value(x)[0] <= 0:
            raise DomainError(f"section defined for x > 0, got {value(x)[0]}")
        if not twist:
            return stack([x[0], 0.0])
        phase = twist * x[0] * x[0]
        return stack([x[0] * cos(phase), x[0] * sin(phase)])

    def potential(Q, f):
        return 0.5 * k * (total(Q * Q) + total(f * f))

    def sampler(rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        return rng.uniform(0.5, 2.0, size=1), rng.uniform(-1.0, 1.0, size=2)

    return ModelSpec(
        name="abelian_disk",
        n_P=2,
        n_G=1,
        n_V=2,
        metric_P=lambda Q: np.eye(2),
        metric_V=lambda f: np.eye(2),
        killing_P=rotation_field,
        killing_V=rotation_field,
        gauge=gauge,
        section=section,
        potential=potential,
        lie=LieData(np.zeros((1, 1, 1))),
        chart=so2_chart(),
        action_P=lambda Q, a: matmul(_rotation_2d(float(a[0])), Q),
        action_V=lambda f, a: matmul(_rotation_2d(float(a[0])), f),
        base_guess=lambda Q: np.array([np.hypot(Q[0], Q[1])]),
        sampler=sampler,
        params=params,
    )


# Series in s = |q|^2 for sin(t)/t, (1 - cos t)/t^2 and (t - sin t)/t^3.
_SINC = [1.0, -1 / 6, 1 / 120, -1 / 5040, 1 / 362880, -1 / 39916800]
_COS_TERM = [1 / 2, -1 / 24, 1 / 720, -1 / 40320, 1 / 3628800, -1 / 479001600]
_SIN_TERM = [1 / 6, -1 / 120, 1 / 5040, -1 / 362880, 1 / 39916800, -1 / 6227020800]
_SERIES_CUTOFF = 1e-2

SO3_CHART_CAP = math.pi - 0.1


def hat(v):
    """Cross-product matrix: hat(v) @ w = v x w."""
    return stack(
        [
            stack([0.0, -v[2], v[1]]),
            stack([v[2], 0.0, -v[0]]),
            stack([-v[1], v[0], 0.0]),
        ]
    )


def _rotation_coefficients(q):
    s = total(q * q)
    if float(value(s)) < _SERIES_CUTOFF:
        return polynomial(s, _SINC), polynomial(s, _COS_TERM), polynomial(s, _SIN_TERM)
    theta = sqrt(s)
    sin_t, cos_t = sin(theta), cos(theta)
    return sin_t / theta, (1.0 - cos_t) / s, (theta - sin_t) / (s * theta)


def rotation_matrix(q):
    sinc, a, _ = _rotation_coefficients(q)
    K = hat(q)
    return np.eye(3) + sinc * K + a * matmul(K, K)


def right_jacobian(q):
    """J_r(q): body angular velocity = J_r(q) qdot."""
    _, a, b = _rotation_coefficients(q)
    K = hat(q)
    return np.eye(3) - a * K + b * matmul(K, K)


def left_jacobian(q):
    """J_l(q): spatial angular velocity = J_l(q) qdot."""
    _, a, b = _rotation_coefficients(q)
    K = hat(q)
    return np.eye(3) + a * K + b * matmul(K, K)


def _check_chart(q) -> None:
    angle = float(np.linalg.norm(value(q)))
    if angle > SO3_CHART_CAP:
        raise OutOfChartError(f"rotation angle {angle:.4f} beyond chart cap {SO3_CHART_CAP:.4f}")


def left_translate(q, g: np.ndarray):
    """Rotation vector of exp(g) exp(q); duals in q carried by J_r."""
    if isinstance(q, Dual):
        moved = left_translate(q.real, g)
        tangent = matmul(inv(right_jacobian(moved)), matmul(right_jacobian(q.real), q.dual))
        return Dual(moved, tangent)
    return (Rotation.from_rotvec(g) * Rotation.from_rotvec(q)).as_rotvec()


def so3_chart() -> GroupChart:
    def compose(a, b):
        return (Rotation.from_rotvec(a) * Rotation.from_rotvec(b)).as_rotvec()

    return GroupChart(
        dim_g=3,
        compose=compose,
        inverse=lambda a: -np.asarray(a, dtype=float),
        identity=np.zeros(3),
        exp=lambda xi: Rotation.from_rotvec(xi).as_rotvec(),
        chart_domain=math.pi,
    )


def so3_coupled(params: SO3CoupledParams) -> ModelSpec:
    i1, i2, i3, m, lam = params.i1, params.i2, params.i3, params.m, params.lam
    k1, k2, k3 = params.k1, params.k2, params.k3
    coupling = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])

    def inertia(y):
        y1, y2 = y[0] * y[0], y[1] * y[1]
        return stack(
            [
                stack([i1 + m * y1, 0.0, 0.0]),
                stack([0.0, i2 + m * y2, 0.0]),
                stack([0.0, 0.0, i3 + m * (y1 + y2)]),
            ]
        )

    def metric_P(Q):
        q, y = Q[0:3], Q[3:5]
        _check_chart(q)
        J = right_jacobian(q)
        G_qq = matmul(transpose(J), matmul(inertia(y), J))
        G_qy = lam * matmul(transpose(J), coupling)
        top = concatenate([G_qq, G_qy], axis=1)
        bottom = concatenate([transpose(G_qy), np.eye(2)], axis=1)
        return concatenate([top, bottom], axis=0)

    def killing_P(Q):
        q = Q[0:3]
        _check_chart(q)
        return concatenate([inv(left_jacobian(q)), np.zeros((2, 3))], axis=0)

    def killing_V(f):
        return -hat(f)

    def section(x):
        return concatenate([np.zeros(3), x])

    def potential(Q, f):
        y = Q[3:5]
        ff = total(f * f)
        return 0.5 * k1 * ff + 0.5 * k2 * total(y * y) + k3 * y[0] * ff

    def action_P(Q, a):
        return concatenate([left_translate(Q[0:3], np.asarray(a, dtype=float)), Q[3:5]])

    def action_V(f, a):
        return matmul(Rotation.from_rotvec(a).as_matrix(), f)

    def sampler(rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        return rng.uniform(-0.5, 0.5, size=2), rng.uniform(-1.0, 1.0, size=3)

    return ModelSpec(
        name="so3_coupled",
        n_P=5,
        n_G=3,
        n_V=3,
        metric_P=metric_P,
        metric_V=lambda f: np.eye(3),
        killing_P=killing_P,
        killing_V=killing_V,
        gauge=lambda Q: Q[0:3],
        section=section,
        potential=potential,
        lie=LieData(-levi_civita()),
        chart=so3_chart(),
        action_P=action_P,
        action_V=action_V,
        base_guess=lambda Q: np.asarray(Q[3:5], dtype=float),
        sampler=sampler,
        params=params,
    )


def translation_chart() -> GroupChart:
    return GroupChart(
        dim_g=1,
        compose=lambda a, b: np.asarray(a, dtype=float) + np.asarray(b, dtype=float),
        inverse=lambda a: -np.asarray(a, dtype=float),
        identity=np.zeros(1),
        exp=lambda xi: np.asarray(xi, dtype=float),
        chart_domain=math.inf,
    )


def flat_product(params: FlatProductParams) -> ModelSpec:
    k, n_V = params.k, 1 if params.fiber else 0
    shift = np.array([0.0, 0.0, 1.0])

    def potential(Q, f):
        energy = Q[0] * Q[0] + Q[1] * Q[1]
        if n_V:
            stretch = f[0] - Q[2]
            energy = energy + stretch * stretch
        return 0.5 * k * energy

    def sampler(rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        return rng.uniform(-1.0, 1.0, size=2), rng.uniform(-1.0, 1.0, size=n_V)

    return ModelSpec(
        name="flat_product",
        n_P=3,
        n_G=1,
        n_V=n_V,
        metric_P=lambda Q: np.eye(3),
        metric_V=lambda f: np.eye(n_V),
        killing_P=lambda Q: shift[:, None],
        killing_V=lambda f: np.ones((n_V, 1)),
        gauge=lambda Q: Q[2:3],
        section=lambda x: stack([x[0], x[1], 0.0]),
        potential=potential,
        lie=LieData(np.zeros((1, 1, 1))),
        chart=translation_chart(),
        action_P=lambda Q, a: Q + shift * float(a[0]),
        action_V=lambda f, a: f + float(a[0]) * np.ones(n_V),
        base_guess=lambda Q: np.asarray(Q[0:2], dtype=float),
        sampler=sampler,
        params=params,
    )


MODEL_REGISTRY: Dict[str, Tuple[Type[ModelParams], Callable[[Any], ModelSpec]]] = {
    "abelian_disk": (AbelianDiskParams, abelian_disk),
    "so3_coupled": (SO3CoupledParams, so3_coupled),
    "flat_product": (FlatProductParams, flat_product),
}


def instantiate(name: str, params: Optional[Any] = None) -> ModelSpec:
    """Build a built-in model from a params object or a plain mapping."""
    if name not in MODEL_REGISTRY:
        raise ModelNotFoundError(
            f"unknown model '{name}'; available: {', '.join(sorted(MODEL_REGISTRY))}"
        )
    params_cls, factory = MODEL_REGISTRY[name]
    if params is None:
        params = params_cls()
    elif not isinstance(params, params_cls):
        try:
            raw = params.model_dump() if isinstance(params, BaseModel) else dict(params)
            params = params_cls(**raw)
        except ValidationError as exc:
            raise ParameterError(f"invalid parameters for {name}: {exc}") from exc
    model = factory(params)
    logger.debug(f"instantiated {name} with {params.model_dump()}")
    return model


def sample_points(model: ModelSpec, count: int, rng: np.random.Generator):
    """Valid (x, f~) section points."""
    return [model.sampler(rng) for _ in range(count)]


def ambient_samples(model: ModelSpec, count: int, rng: np.random.Generator):
    """(Q, f) points off the section: random group translates of section points."""
    points = []
    for x, f_tilde in sample_points(model, count, rng):
        a = model.chart.exp(rng.uniform(-1.0, 1.0, size=model.n_G))
        Q = np.asarray(model.action_P(np.asarray(model.section(x)), a), dtype=float)
        f = np.asarray(model.action_V(f_tilde, a), dtype=float)
        points.append((Q, f))
    return points
