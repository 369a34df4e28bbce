#!/usr/bin/env python3
"""
Reduced and unreduced equations of motion

Reduced state (x, f~, xdot, f~dot, p) with q = (x, f~):

    qddot^L = -Gamma^L_{JK} qdot^J qdot^K
              - h~^{LI} (F^a_{KI} qdot^K p_a + 1/2 D_I d^{ks} p_k p_s + d_I V)
    pdot_b  = -c^n_{mb} d^{ms} p_s p_n + c^n_{sb} (A_q qdot)^s p_n

The full-space system is the Euler-Lagrange flow of
1/2 G_AB Qdot Qdot + 1/2 G_ab fdot fdot - V on P x V.
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .bundle import DynamicsPoint, ModelSpec, dynamics_point, geometry_point, invariant_coordinates
from .calculus import Dual, evaluate_jet, matmul, seed, total
from .christoffel import lower_christoffel
from .errors import DegeneracyError, DomainError, ShapeError
from .gaugefield import covariant_d, curvature_from_connection

logger = logging.getLogger(__name__)


def _vector(values, size: int, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float).reshape(-1)
    if array.size != size:
        raise ShapeError(f"{name} must have {size} entries, got {array.size}")
    return array


@dataclass(frozen=True, eq=False)
class ReducedState:
    x: np.ndarray
    f_tilde: np.ndarray
    xdot: np.ndarray
    fdot: np.ndarray
    p: np.ndarray

    @property
    def q(self) -> np.ndarray:
        return np.concatenate([self.x, self.f_tilde])

    @property
    def qdot(self) -> np.ndarray:
        return np.concatenate([self.xdot, self.fdot])

    def to_vector(self) -> np.ndarray:
        """Integrator ordering (x, f~, xdot, f~dot, p)."""
        return np.concatenate([self.x, self.f_tilde, self.xdot, self.fdot, self.p])

    @classmethod
    def from_vector(cls, model: ModelSpec, vector: np.ndarray) -> "ReducedState":
        n_x, n_V = model.n_x, model.n_V
        y = _vector(vector, 2 * (n_x + n_V) + model.n_G, "reduced state")
        cuts = np.cumsum([n_x, n_V, n_x, n_V])
        x, f_tilde, xdot, fdot, p = np.split(y, cuts)
        return cls(x=x, f_tilde=f_tilde, xdot=xdot, fdot=fdot, p=p)

    @classmethod
    def build(cls, model: ModelSpec, x, f_tilde, xdot, fdot, p) -> "ReducedState":
        state = cls(
            x=_vector(x, model.n_x, "x"),
            f_tilde=_vector(f_tilde, model.n_V, "f"),
            xdot=_vector(xdot, model.n_x, "xdot"),
            fdot=_vector(fdot, model.n_V, "fdot"),
            p=_vector(p, model.n_G, "p"),
        )
        if not np.all(np.isfinite(state.to_vector())):
            raise DomainError("reduced state has non-finite entries")
        return state


@dataclass(frozen=True, eq=False)
class FullState:
    Q: np.ndarray
    f: np.ndarray
    Qdot: np.ndarray
    fdot: np.ndarray

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.Q, self.f, self.Qdot, self.fdot])

    @classmethod
    def from_vector(cls, model: ModelSpec, vector: np.ndarray) -> "FullState":
        n_P, n_V = model.n_P, model.n_V
        y = _vector(vector, 2 * (n_P + n_V), "full state")
        Q, f, Qdot, fdot = np.split(y, np.cumsum([n_P, n_V, n_P]))
        return cls(Q=Q, f=f, Qdot=Qdot, fdot=fdot)


def _derivative(model: ModelSpec, s: ReducedState, point: DynamicsPoint) -> ReducedState:
    """h~ qddot = -Gamma_{JKL} qdot qdot - F qdot p - 1/2 D d p p - dV, plus pdot."""
    c = model.lie.c
    qdot, p = s.qdot, s.p
    F_q = curvature_from_connection(c, point.A_q, point.dA)
    D_q = covariant_d(c, point.A_q, point.d_upper, point.dd_upper)
    force = (
        np.einsum("JKL,J,K->L", lower_christoffel(point.dh), qdot, qdot)
        + np.einsum("aKI,K,a->I", F_q, qdot, p)
        + 0.5 * np.einsum("ksI,k,s->I", D_q, p, p)
        + point.dV
    )
    try:
        qddot = -cho_solve(cho_factor(point.h), force)
    except LinAlgError as exc:
        raise DegeneracyError(f"block metric not positive definite at x={s.x}: {exc}") from exc

    pdot = -np.einsum("nmb,ms,s,n->b", c, point.d_upper, p, p) + np.einsum(
        "nsb,s,n->b", c, point.A_q @ qdot, p
    )
    n_x = model.n_x
    return ReducedState(
        x=s.xdot, f_tilde=s.fdot, xdot=qddot[:n_x], fdot=qddot[n_x:], p=pdot
    )


def _energy(s: ReducedState, point: DynamicsPoint) -> float:
    qdot = s.qdot
    kinetic = 0.5 * qdot @ point.h @ qdot
    vertical = 0.5 * s.p @ point.d_upper @ s.p
    return float(kinetic + vertical + point.potential)


def reduced_rhs(model: ModelSpec, s: ReducedState) -> ReducedState:
    """Time derivative of a reduced state."""
    return _derivative(model, s, dynamics_point(model, s.x, s.f_tilde))


def energy(model: ModelSpec, s: ReducedState) -> float:
    """1/2 qdot h~ qdot + 1/2 d^{ks} p_k p_s + V."""
    return _energy(s, dynamics_point(model, s.x, s.f_tilde, derivatives=False))


class ReducedSystem:
    """Reduced vector field and energy for one integration run.

    The geometry of the last evaluated configuration is kept, so the energy
    of an output row and the first RK4 stage of the next step share it.
    """

    def __init__(self, model: ModelSpec):
        self.model = model
        self._key = None
        self._point = None

    def point(self, s: ReducedState) -> DynamicsPoint:
        key = s.x.tobytes() + s.f_tilde.tobytes()
        if key != self._key:
            self._point = dynamics_point(self.model, s.x, s.f_tilde)
            self._key = key
        return self._point

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        s = ReducedState.from_vector(self.model, y)
        return _derivative(self.model, s, self.point(s)).to_vector()

    def energy(self, y: np.ndarray) -> float:
        s = ReducedState.from_vector(self.model, y)
        return _energy(s, self.point(s))


def reduced_vector_field(model: ModelSpec) -> Callable[[float, np.ndarray], np.ndarray]:
    return ReducedSystem(model).rhs


def _split_jet(x, n: int):
    if isinstance(x, Dual):
        return np.asarray(x.real, dtype=float), np.asarray(x.dual, dtype=float)
    x = np.asarray(x, dtype=float)
    return x, np.zeros(x.shape + (n,))


def _ambient_metric(model: ModelSpec, Q: np.ndarray, f: np.ndarray):
    """G~, its derivative dG[I, J, K] = d_K G~_IJ and dV over (Q, f)."""
    n_P, n_V = model.n_P, model.n_V
    n = n_P + n_V
    z = seed(np.concatenate([Q, f]))
    Qd, fd = z[:n_P], z[n_P:]
    G_P, dG_P = _split_jet(model.metric_P(Qd), n)
    G_V, dG_V = _split_jet(model.metric_V(fd), n)
    _, dV = _split_jet(model.potential(Qd, fd), n)
    G = np.zeros((n, n))
    dG = np.zeros((n, n, n))
    G[:n_P, :n_P] = G_P.reshape(n_P, n_P)
    G[n_P:, n_P:] = G_V.reshape(n_V, n_V)
    dG[:n_P, :n_P] = dG_P.reshape(n_P, n_P, n)
    dG[n_P:, n_P:] = dG_V.reshape(n_V, n_V, n)
    return G, dG, dV.reshape(n)


def full_rhs(model: ModelSpec, s: FullState) -> FullState:
    """Geodesic plus potential-force acceleration on P x V."""
    G, dG, dV = _ambient_metric(model, s.Q, s.f)
    v = np.concatenate([s.Qdot, s.fdot])
    force = np.einsum("JKM,J,K->M", lower_christoffel(dG), v, v) + dV
    try:
        acceleration = -cho_solve(cho_factor(G), force)
    except LinAlgError as exc:
        raise DegeneracyError(f"ambient metric singular at Q={s.Q}: {exc}") from exc
    n_P = model.n_P
    return FullState(Q=s.Qdot, f=s.fdot, Qdot=acceleration[:n_P], fdot=acceleration[n_P:])


def full_vector_field(model: ModelSpec) -> Callable[[float, np.ndarray], np.ndarray]:
    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return full_rhs(model, FullState.from_vector(model, y)).to_vector()

    return rhs


def full_energy(model: ModelSpec, s: FullState) -> float:
    G_P = np.asarray(model.metric_P(s.Q), dtype=float)
    G_V = np.asarray(model.metric_V(s.f), dtype=float).reshape(model.n_V, model.n_V)
    V = float(np.asarray(model.potential(s.Q, s.f)))
    return float(0.5 * s.Qdot @ G_P @ s.Qdot + 0.5 * s.fdot @ G_V @ s.fdot + V)


def _transport(action: Callable, point: np.ndarray, a_inv: np.ndarray, velocity: np.ndarray):
    if point.size == 0:
        return np.zeros(0)
    jacobian = evaluate_jet(lambda z: action(z, a_inv), point).jacobian
    return jacobian @ velocity


def project_full_state(model: ModelSpec, s: FullState) -> ReducedState:
    """Invariant coordinates, section-frame velocities and vertical momenta."""
    x, a, f_tilde = invariant_coordinates(model, s.Q, s.f)
    a_inv = model.chart.inverse(a)
    Qdot_c = _transport(model.action_P, s.Q, a_inv, s.Qdot)
    fdot_c = _transport(model.action_V, s.f, a_inv, s.fdot)

    gp = geometry_point(model, x, f_tilde)
    omega = gp.A_P @ Qdot_c + gp.A_V @ fdot_c
    pr = gp.projectors
    return ReducedState(
        x=x,
        f_tilde=f_tilde,
        xdot=pr.T @ pr.N_PP @ Qdot_c,
        fdot=pr.N_VP @ Qdot_c + fdot_c,
        p=gp.orbit.d_lower @ omega,
    )


def initial_lift(model: ModelSpec, s: ReducedState) -> FullState:
    """Full state on the section whose projection is ``s``."""
    gp = geometry_point(model, s.x, s.f_tilde)
    eta = gp.orbit.d_upper @ s.p - gp.A_q @ s.qdot
    return FullState(
        Q=gp.Q_star.copy(),
        f=s.f_tilde.copy(),
        Qdot=gp.Y @ s.xdot + gp.K_P @ eta,
        fdot=s.fdot + gp.K_V @ eta,
    )


def _reduced_lagrangian(model: ModelSpec, z):
    """l(q, v, eta) = 1/2 |Q*_i v^i + K eta|^2_G + 1/2 |v_f + K_V eta|^2 - V."""
    n_x, n_q = model.n_x, model.n_q
    x, f = z[:n_x], z[n_x:n_q]
    v, eta = z[n_q : 2 * n_q], z[2 * n_q :]
    # one more dual level carries the directional derivative Q*_i v^i
    moving = model.section(Dual(x, v[:n_x][:, None]))
    Q, Yv = moving.real, moving.dual[..., 0]
    w_P = Yv + matmul(model.killing_P(Q), eta)
    w_V = v[n_x:] + matmul(model.killing_V(f), eta)
    kinetic = total(w_P * matmul(model.metric_P(Q), w_P)) + total(
        w_V * matmul(model.metric_V(f), w_V)
    )
    return 0.5 * kinetic - model.potential(Q, f)


def lagrangian_rhs(model: ModelSpec, s: ReducedState) -> ReducedState:
    """Reduced time derivative from a generic Lagrange-Poincare solve.

    Uses only model maps: second jets of l(q, qdot, eta) by nested duals, the
    group velocity eta recovered from p = dl/deta, and the vertical equation
    mudot_b = -c^g_{ab} eta^a mu_g.
    """
    n_q, n_G = model.n_q, model.n_G
    x, qdot, p = s.x, s.qdot, s.p
    Q_star = np.asarray(model.section(x), dtype=float)
    Y = evaluate_jet(model.section, x).jacobian
    K_P = np.asarray(model.killing_P(Q_star), dtype=float).reshape(model.n_P, n_G)
    K_V = np.asarray(model.killing_V(s.f_tilde), dtype=float).reshape(model.n_V, n_G)
    G_P = np.asarray(model.metric_P(Q_star), dtype=float)
    G_V = np.asarray(model.metric_V(s.f_tilde), dtype=float).reshape(model.n_V, model.n_V)
    d = K_P.T @ G_P @ K_P + K_V.T @ G_V @ K_V
    momentum_at_rest = K_P.T @ G_P @ Y @ s.xdot + K_V.T @ G_V @ s.fdot
    eta = np.linalg.solve(d, p - momentum_at_rest)

    z0 = np.concatenate([s.q, qdot, eta])
    jet = evaluate_jet(lambda z: _reduced_lagrangian(model, z), z0, order=2)
    grad, hess = jet.jacobian, jet.hessian
    iq, iv, ie = slice(0, n_q), slice(n_q, 2 * n_q), slice(2 * n_q, 2 * n_q + n_G)

    mu_dot = -np.einsum("gab,a,g->b", model.lie.c, eta, p)
    lhs = np.block([[hess[iv, iv], hess[iv, ie]], [hess[ie, iv], hess[ie, ie]]])
    rhs = np.concatenate(
        [grad[iq] - hess[iv, iq] @ qdot, mu_dot - hess[ie, iq] @ qdot]
    )
    accelerations = np.linalg.solve(lhs, rhs)
    n_x = model.n_x
    return ReducedState(
        x=s.xdot,
        f_tilde=s.fdot,
        xdot=accelerations[:n_x],
        fdot=accelerations[n_x:n_q],
        p=mu_dot,
    )
