#!/usr/bin/env python3
"""
Section geometry, orbit metrics and projectors

Coordinates: Q on P (n_P), f on V (n_V), group dimension n_G, base
coordinates x (n_x = n_P - n_G) parametrising the section x -> Q*(x).
Reduced coordinates are q = (x, f~) with n_q = n_x + n_V. Tilde objects live on
P x V with the block-diagonal metric diag(G_P, G_V) and the block Killing field
K~ = (K_P; K_V).

Index convention for stored arrays: an upper index is a row, a lower index a
column, derivative axes come last.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Optional, Tuple

import numpy as np

from .algebra import GroupChart, LieData
from .calculus import (
    Dual,
    Jet2,
    concatenate,
    evaluate_jet,
    inv,
    matmul,
    transpose,
    value,
)
from .checks import CheckReport
from .errors import DegeneracyError, GaugeTransversalityError, OutOfChartError

logger = logging.getLogger(__name__)

SECTION_RANK_TOLERANCE = 1e-8
DEGENERACY_TOLERANCE = 1e-12
NEWTON_MAX_ITERATIONS = 50
NEWTON_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Geometric data of a mechanical system on P x V with symmetry group G.

    All maps accept plain arrays or ``Dual`` arrays built with the helpers of
    ``reduction_engine.calculus``. ``action_P``/``action_V`` need only accept
    duals in their first argument; the group element is always numeric.
    """

    name: str
    n_P: int
    n_G: int
    n_V: int
    metric_P: Callable[[Any], Any]
    metric_V: Callable[[Any], Any]
    killing_P: Callable[[Any], Any]
    killing_V: Callable[[Any], Any]
    gauge: Callable[[Any], Any]
    section: Callable[[Any], Any]
    potential: Callable[[Any, Any], Any]
    lie: LieData
    chart: GroupChart
    action_P: Callable[[Any, np.ndarray], Any]
    action_V: Callable[[Any, np.ndarray], Any]
    base_guess: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.random.Generator], Tuple[np.ndarray, np.ndarray]]
    params: Any = None

    @property
    def n_x(self) -> int:
        return self.n_P - self.n_G

    @property
    def n_q(self) -> int:
        return self.n_x + self.n_V

    @property
    def n_ambient(self) -> int:
        return self.n_P + self.n_V


@dataclass(frozen=True, eq=False)
class OrbitMetrics:
    gamma: np.ndarray
    gamma_prime: np.ndarray
    d_lower: np.ndarray
    d_upper: np.ndarray


@dataclass(frozen=True, eq=False)
class ProjectorSet:
    """Projectors at a section point.

    ``N_PP``/``N_VP`` are the gauge-based blocks of N~ (the blocks N_PV = 0 and
    N_VV = identity are implicit). ``N_metric`` is the metric-based
    construction Q* h^-1 Q*^T G^H. ``P_perp`` projects onto T Sigma along the
    orbits, built from the direct-sum basis [Q*_i | K]; ``P_orth`` is the
    G-orthogonal complement of the orbits.
    """

    N_PP: np.ndarray
    N_VP: np.ndarray
    N_metric: np.ndarray
    P_perp: np.ndarray
    P_orth: np.ndarray
    T: np.ndarray
    Phi: np.ndarray
    Pi_tilde: np.ndarray

    @property
    def N_tilde(self) -> np.ndarray:
        n_P, n_V = self.N_PP.shape[0], self.N_VP.shape[0]
        top = np.hstack([self.N_PP, np.zeros((n_P, n_V))])
        bottom = np.hstack([self.N_VP, np.eye(n_V)])
        return np.vstack([top, bottom])


@dataclass(frozen=True, eq=False)
class BlockMetric:
    """Reduced metric in (x, f~) coordinates and its inverse blocks."""

    h_tilde: np.ndarray
    cross: np.ndarray
    vv: np.ndarray
    inv_hh: np.ndarray
    inv_hv: np.ndarray
    inv_vv: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.block([[self.h_tilde, self.cross], [self.cross.T, self.vv]])

    def inverse(self) -> np.ndarray:
        return np.block([[self.inv_hh, self.inv_hv], [self.inv_hv.T, self.inv_vv]])


@dataclass(frozen=True, eq=False)
class AmbientJets:
    """Derivatives by the ambient coordinates (Q, f) at (Q*(x), f~).

    Derivative axes run over the n_P + n_V ambient coordinates.
    """

    G_tilde_H: np.ndarray
    dG_tilde_H: np.ndarray
    connection: np.ndarray
    dconnection: np.ndarray
    d_upper: np.ndarray
    dd_upper: np.ndarray
    dV: np.ndarray


@dataclass(frozen=True, eq=False)
class DynamicsPoint:
    """What the reduced equations of motion read at one (x, f~).

    Derivative fields follow the GeometryPoint layout and are ``None`` for a
    value-only evaluation.
    """

    h: np.ndarray
    A_q: np.ndarray
    d_upper: np.ndarray
    potential: float
    dh: Optional[np.ndarray] = None
    dA: Optional[np.ndarray] = None
    dd_upper: Optional[np.ndarray] = None
    dV: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class GeometryPoint:
    """Every pointwise quantity at one (x, f~); immutable once built.

    Derivative arrays ``dh``, ``dA``, ``dd_upper`` and ``dV`` are taken by the
    reduced coordinates q = (x, f~):
      dh[I, J, K] = d_K h~_IJ, dA[a, I, K] = d_K A^a_I, dd_upper[k, s, K] = d_K d^ks.
    """

    model: ModelSpec
    x: np.ndarray
    f_tilde: np.ndarray
    section: Jet2
    Q_star: np.ndarray
    gauge_jacobian: np.ndarray
    G_P: np.ndarray
    G_V: np.ndarray
    K_P: np.ndarray
    K_V: np.ndarray
    orbit: OrbitMetrics
    G_H: np.ndarray
    G_tilde_H: np.ndarray
    block: BlockMetric
    projectors: ProjectorSet
    A_P: np.ndarray
    A_V: np.ndarray
    A_q: np.ndarray
    dh: np.ndarray
    dA: np.ndarray
    dd_upper: np.ndarray
    potential: float
    dV: np.ndarray
    ambient: Optional[AmbientJets] = None

    @property
    def Y(self) -> np.ndarray:
        """Section differential Q*^A_i."""
        return self.section.jacobian

    @property
    def K_tilde(self) -> np.ndarray:
        return np.vstack([self.K_P, self.K_V])

    @property
    def G_tilde_inverse(self) -> np.ndarray:
        n_P, n_V = self.model.n_P, self.model.n_V
        out = np.zeros((n_P + n_V, n_P + n_V))
        out[:n_P, :n_P] = np.linalg.inv(self.G_P)
        out[n_P:, n_P:] = inv(self.G_V)
        return out

    @property
    def lift(self) -> np.ndarray:
        """Block lift [[Q*_i, 0], [0, 1]] from q-space into P x V."""
        n_P, n_V, n_x = self.model.n_P, self.model.n_V, self.model.n_x
        out = np.zeros((n_P + n_V, n_x + n_V))
        out[:n_P, :n_x] = self.Y
        out[n_P:, n_x:] = np.eye(n_V)
        return out


def _require_positive_definite(matrix: np.ndarray, what: str) -> None:
    if matrix.size == 0:
        return
    eigenvalues = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    if not np.all(np.isfinite(eigenvalues)) or eigenvalues[0] <= DEGENERACY_TOLERANCE * scale:
        raise DegeneracyError(
            f"{what} is not positive definite (smallest eigenvalue {eigenvalues[0]:.3e})"
        )


def _orbit_pipeline(G_P, K_P, G_V, K_V) -> Dict[str, Any]:
    """Orbit metrics, connection and horizontal metric blocks.

    Works on plain arrays and on duals alike, so derivatives of every output
    come from a single evaluation.
    """
    GK_P = matmul(G_P, K_P)
    GK_V = matmul(G_V, K_V)
    gamma = matmul(transpose(K_P), GK_P)
    gamma_prime = matmul(transpose(K_V), GK_V)
    d_lower = gamma + gamma_prime
    _require_positive_definite(value(d_lower), "orbit metric d")
    d_upper = inv(d_lower)
    A_P = matmul(d_upper, transpose(GK_P))
    A_V = matmul(d_upper, transpose(GK_V))
    return {
        "GK_P": GK_P,
        "GK_V": GK_V,
        "gamma": gamma,
        "gamma_prime": gamma_prime,
        "d_lower": d_lower,
        "d_upper": d_upper,
        "A_P": A_P,
        "A_V": A_V,
        "GH_PP": G_P - matmul(GK_P, A_P),
        "GH_PV": -matmul(GK_P, A_V),
        "GH_VV": G_V - matmul(GK_V, A_V),
    }


def _split(x: Any, n: int) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(x, Dual):
        return np.asarray(x.real, dtype=float), np.asarray(x.dual, dtype=float)
    x = np.asarray(x, dtype=float)
    return x, np.zeros(x.shape + (n,))


def _field_values(model: ModelSpec, Q, f):
    return (
        np.asarray(model.metric_P(Q), dtype=float),
        np.asarray(model.killing_P(Q), dtype=float).reshape(model.n_P, model.n_G),
        np.asarray(model.metric_V(f), dtype=float).reshape(model.n_V, model.n_V),
        np.asarray(model.killing_V(f), dtype=float).reshape(model.n_V, model.n_G),
    )


def section_jet(model: ModelSpec, x: np.ndarray) -> Jet2:
    """Q*, Q*_i and Q*_ij at x, with a rank check on Q*_i."""
    jet = evaluate_jet(model.section, np.atleast_1d(x), order=2)
    if model.n_x:
        smallest = np.linalg.svd(jet.jacobian, compute_uv=False)[-1]
        if smallest <= SECTION_RANK_TOLERANCE:
            raise DegeneracyError(
                f"section differential is rank deficient at x={x} (sigma_min={smallest:.3e})"
            )
    return jet


def orbit_metrics(model: ModelSpec, Q: np.ndarray, f: np.ndarray) -> OrbitMetrics:
    G_P, K_P, G_V, K_V = _field_values(model, Q, f)
    pipe = _orbit_pipeline(G_P, K_P, G_V, K_V)
    return OrbitMetrics(
        gamma=pipe["gamma"],
        gamma_prime=pipe["gamma_prime"],
        d_lower=pipe["d_lower"],
        d_upper=pipe["d_upper"],
    )


def _horizontal_P(G_P: np.ndarray, K_P: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    _require_positive_definite(gamma, "orbit metric gamma")
    GK = G_P @ K_P
    return G_P - GK @ np.linalg.solve(gamma, GK.T)


def horizontal_metrics(
    model: ModelSpec, Q: np.ndarray, f: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """(G^H on P, G~^H on P x V)."""
    G_P, K_P, G_V, K_V = _field_values(model, Q, f)
    pipe = _orbit_pipeline(G_P, K_P, G_V, K_V)
    G_H = _horizontal_P(G_P, K_P, pipe["gamma"])
    G_tilde_H = np.block([[pipe["GH_PP"], pipe["GH_PV"]], [pipe["GH_PV"].T, pipe["GH_VV"]]])
    return G_H, G_tilde_H


def base_metric(model: ModelSpec, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(h_ij, h^ij): the pull-back of G^H by the section."""
    jet = section_jet(model, x)
    G_P = np.asarray(model.metric_P(jet.value), dtype=float)
    K_P = np.asarray(model.killing_P(jet.value), dtype=float).reshape(model.n_P, model.n_G)
    G_H = _horizontal_P(G_P, K_P, K_P.T @ G_P @ K_P)
    h = jet.jacobian.T @ G_H @ jet.jacobian
    _require_positive_definite(h, "base metric h")
    return h, np.linalg.inv(h)


def _inverse_blocks(
    T: np.ndarray, N_PP: np.ndarray, N_VP: np.ndarray, G_P_inv: np.ndarray, G_V_inv: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """h~^ij = G^EF N^S_E N^D_F T^j_S T^i_D, h~^jb = G^EF N^b_F N^P_E T^j_P,
    h~^cb = G^cb + G^EF N^c_E N^b_F."""
    TN = T @ N_PP
    inv_hh = TN @ G_P_inv @ TN.T
    inv_hv = TN @ G_P_inv @ N_VP.T
    inv_vv = G_V_inv + N_VP @ G_P_inv @ N_VP.T
    return inv_hh, inv_hv, inv_vv


def _projectors(
    Y: np.ndarray,
    gauge_jacobian: np.ndarray,
    G_P: np.ndarray,
    G_V: np.ndarray,
    K_P: np.ndarray,
    K_V: np.ndarray,
    gamma: np.ndarray,
    G_H: np.ndarray,
    G_tilde_H: np.ndarray,
) -> ProjectorSet:
    n_P, n_x = Y.shape
    Phi = gauge_jacobian @ K_P
    if Phi.size and np.linalg.cond(Phi) > 1e12:
        raise GaugeTransversalityError(
            f"gauge is not transversal to the orbits (cond Phi = {np.linalg.cond(Phi):.3e})"
        )
    Phi_chi = np.linalg.solve(Phi, gauge_jacobian)
    N_PP = np.eye(n_P) - K_P @ Phi_chi
    N_VP = -K_V @ Phi_chi

    h = Y.T @ G_H @ Y
    _require_positive_definite(h, "base metric h")
    T = np.linalg.solve(h, Y.T @ G_H)
    N_metric = Y @ T

    basis = np.hstack([Y, K_P])
    P_perp = np.hstack([Y, np.zeros_like(K_P)]) @ np.linalg.inv(basis)
    P_orth = np.eye(n_P) - K_P @ np.linalg.solve(gamma, K_P.T @ G_P)

    n_V = G_V.shape[0]
    G_tilde_inv = np.zeros((n_P + n_V, n_P + n_V))
    G_tilde_inv[:n_P, :n_P] = np.linalg.inv(G_P)
    G_tilde_inv[n_P:, n_P:] = inv(G_V)
    return ProjectorSet(
        N_PP=N_PP,
        N_VP=N_VP,
        N_metric=N_metric,
        P_perp=P_perp,
        P_orth=P_orth,
        T=T,
        Phi=Phi,
        Pi_tilde=G_tilde_inv @ G_tilde_H,
    )


def _seed_section(jet: Jet2, f_tilde: np.ndarray, n_x: int, n_V: int):
    """Q*, Q*_i and f~ as duals over q = (x, f~)."""
    n_P = jet.value.shape[0]
    Q_star = Dual(jet.value, np.hstack([jet.jacobian, np.zeros((n_P, n_V))]))
    Y = Dual(
        jet.jacobian,
        np.concatenate([jet.hessian, np.zeros((n_P, n_x, n_V))], axis=2),
    )
    f = Dual(f_tilde, np.hstack([np.zeros((n_V, n_x)), np.eye(n_V)]))
    return Q_star, Y, f


def _ambient_jets(model: ModelSpec, Q_star: np.ndarray, f_tilde: np.ndarray) -> AmbientJets:
    n_P, n_V = model.n_P, model.n_V
    n = n_P + n_V
    eye = np.eye(n)
    Q = Dual(Q_star, eye[:n_P])
    f = Dual(f_tilde, eye[n_P:])
    pipe = _orbit_pipeline(model.metric_P(Q), model.killing_P(Q), model.metric_V(f), model.killing_V(f))
    G_tilde_H = concatenate(
        [
            concatenate([pipe["GH_PP"], pipe["GH_PV"]], axis=1),
            concatenate([transpose(pipe["GH_PV"]), pipe["GH_VV"]], axis=1),
        ],
        axis=0,
    )
    connection = concatenate([pipe["A_P"], pipe["A_V"]], axis=1)
    GtH, dGtH = _split(G_tilde_H, n)
    A, dA = _split(connection, n)
    d_up, dd_up = _split(pipe["d_upper"], n)
    _, dV = _split(model.potential(Q, f), n)
    return AmbientJets(
        G_tilde_H=GtH.reshape(n, n),
        dG_tilde_H=dGtH.reshape(n, n, n),
        connection=A.reshape(model.n_G, n),
        dconnection=dA.reshape(model.n_G, n, n),
        d_upper=d_up,
        dd_upper=dd_up,
        dV=dV.reshape(n),
    )


def _reduced_pipeline(model: ModelSpec, jet: Jet2, f_tilde: np.ndarray, derivatives: bool = True):
    """Block metric, connection, d^-1 and V over q = (x, f~).

    Returns the DynamicsPoint together with the orbit pipeline and the raw
    field values, which are duals over q when ``derivatives`` is set.
    """
    n_x, n_V, n_G, n_q = model.n_x, model.n_V, model.n_G, model.n_q
    if derivatives:
        Q_star, Y, f = _seed_section(jet, f_tilde, n_x, n_V)
    else:
        Q_star, Y, f = jet.value, jet.jacobian, f_tilde
    fields = (model.metric_P(Q_star), model.killing_P(Q_star), model.metric_V(f), model.killing_V(f))
    pipe = _orbit_pipeline(*fields)

    h_xx = matmul(transpose(Y), matmul(pipe["GH_PP"], Y))
    h_xv = matmul(transpose(Y), pipe["GH_PV"])
    h = concatenate(
        [
            concatenate([h_xx, h_xv], axis=1),
            concatenate([transpose(h_xv), pipe["GH_VV"]], axis=1),
        ],
        axis=0,
    )
    A_q = concatenate([matmul(pipe["A_P"], Y), pipe["A_V"]], axis=1)
    V = model.potential(Q_star, f)
    if not derivatives:
        point = DynamicsPoint(
            h=value(h).reshape(n_q, n_q),
            A_q=value(A_q).reshape(n_G, n_q),
            d_upper=value(pipe["d_upper"]).reshape(n_G, n_G),
            potential=float(value(V)),
        )
        return point, pipe, fields

    h, dh = _split(h, n_q)
    A_q, dA = _split(A_q, n_q)
    d_upper, dd_upper = _split(pipe["d_upper"], n_q)
    V, dV = _split(V, n_q)
    point = DynamicsPoint(
        h=h.reshape(n_q, n_q),
        A_q=A_q.reshape(n_G, n_q),
        d_upper=d_upper.reshape(n_G, n_G),
        potential=float(V),
        dh=dh.reshape(n_q, n_q, n_q),
        dA=dA.reshape(n_G, n_q, n_q),
        dd_upper=dd_upper.reshape(n_G, n_G, n_q),
        dV=dV.reshape(n_q),
    )
    return point, pipe, fields


def dynamics_point(
    model: ModelSpec, x: np.ndarray, f_tilde: np.ndarray, derivatives: bool = True
) -> DynamicsPoint:
    """Only the quantities the reduced vector field and energy need.

    Skips projectors, the gauge jacobian and the closed-form inverse blocks;
    degeneracy surfaces when the caller factors ``h``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    f_tilde = np.asarray(f_tilde, dtype=float).reshape(model.n_V)
    jet = evaluate_jet(model.section, x, order=2 if derivatives else 1)
    return _reduced_pipeline(model, jet, f_tilde, derivatives)[0]


def geometry_point(
    model: ModelSpec, x: np.ndarray, f_tilde: np.ndarray, ambient: bool = False
) -> GeometryPoint:
    """Evaluate all geometric quantities at (x, f~).

    One dual pass over q = (x, f~) gives values and q-derivatives of the
    block metric, connection, inverse orbit metric and potential.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    f_tilde = np.asarray(f_tilde, dtype=float).reshape(model.n_V)
    n_x, n_V, n_G = model.n_x, model.n_V, model.n_G

    jet = section_jet(model, x)
    point, pipe, (G_P, K_P, G_V, K_V) = _reduced_pipeline(model, jet, f_tilde)
    _require_positive_definite(point.h, "block metric")

    G_P_val = value(G_P).reshape(model.n_P, model.n_P)
    K_P_val = value(K_P).reshape(model.n_P, n_G)
    G_V_val = value(G_V).reshape(n_V, n_V)
    K_V_val = value(K_V).reshape(n_V, n_G)
    gamma = value(pipe["gamma"])
    orbit = OrbitMetrics(
        gamma=gamma,
        gamma_prime=value(pipe["gamma_prime"]).reshape(n_G, n_G),
        d_lower=value(pipe["d_lower"]),
        d_upper=point.d_upper,
    )
    G_H = _horizontal_P(G_P_val, K_P_val, gamma)
    GH_PP, GH_PV, GH_VV = (value(pipe[k]) for k in ("GH_PP", "GH_PV", "GH_VV"))
    GH_PV = GH_PV.reshape(model.n_P, n_V)
    G_tilde_H = np.block([[GH_PP, GH_PV], [GH_PV.T, GH_VV.reshape(n_V, n_V)]])

    gauge_jacobian = evaluate_jet(model.gauge, jet.value).jacobian.reshape(n_G, model.n_P)
    projectors = _projectors(
        jet.jacobian, gauge_jacobian, G_P_val, G_V_val, K_P_val, K_V_val, gamma, G_H, G_tilde_H
    )
    inv_hh, inv_hv, inv_vv = _inverse_blocks(
        projectors.T, projectors.N_PP, projectors.N_VP, np.linalg.inv(G_P_val), inv(G_V_val)
    )
    h = point.h
    block = BlockMetric(
        h_tilde=h[:n_x, :n_x],
        cross=h[:n_x, n_x:],
        vv=h[n_x:, n_x:],
        inv_hh=inv_hh,
        inv_hv=inv_hv,
        inv_vv=inv_vv,
    )
    return GeometryPoint(
        model=model,
        x=x,
        f_tilde=f_tilde,
        section=jet,
        Q_star=jet.value,
        gauge_jacobian=gauge_jacobian,
        G_P=G_P_val,
        G_V=G_V_val,
        K_P=K_P_val,
        K_V=K_V_val,
        orbit=orbit,
        G_H=G_H,
        G_tilde_H=G_tilde_H,
        block=block,
        projectors=projectors,
        A_P=value(pipe["A_P"]).reshape(n_G, model.n_P),
        A_V=value(pipe["A_V"]).reshape(n_G, n_V),
        A_q=point.A_q,
        dh=point.dh,
        dA=point.dA,
        dd_upper=point.dd_upper,
        potential=point.potential,
        dV=point.dV,
        ambient=_ambient_jets(model, jet.value, f_tilde) if ambient else None,
    )


def block_metric(model: ModelSpec, x: np.ndarray, f_tilde: np.ndarray) -> BlockMetric:
    return geometry_point(model, x, f_tilde).block


def projector_set(model: ModelSpec, x: np.ndarray, f_tilde: np.ndarray) -> ProjectorSet:
    return geometry_point(model, x, f_tilde).projectors


def invariant_coordinates(
    model: ModelSpec, Q: np.ndarray, f: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve chi(F(Q, a^-1)) = 0 for a, then read off x and f~ = a^-1 f.

    Newton on the group chart: with Q_c = a^-1 Q the update is
    a <- a exp(Phi(Q_c)^-1 chi(Q_c)), halved while the residual grows.
    """
    chart = model.chart
    Q = np.asarray(Q, dtype=float)
    f = np.asarray(f, dtype=float).reshape(model.n_V)
    a = np.array(chart.identity, dtype=float)
    Q_c = Q
    chi = np.asarray(model.gauge(Q_c), dtype=float)
    for iteration in range(NEWTON_MAX_ITERATIONS):
        if np.linalg.norm(chi) <= NEWTON_TOLERANCE:
            break
        Phi = evaluate_jet(model.gauge, Q_c).jacobian @ np.asarray(model.killing_P(Q_c))
        if np.linalg.cond(Phi) > 1e12:
            raise GaugeTransversalityError(f"Phi singular at Q={Q_c}")
        delta = np.linalg.solve(Phi, chi)
        step = 1.0
        while True:
            trial = chart.compose(a, chart.exp(step * delta))
            trial_Q = np.asarray(model.action_P(Q, chart.inverse(trial)), dtype=float)
            trial_chi = np.asarray(model.gauge(trial_Q), dtype=float)
            if np.linalg.norm(trial_chi) < np.linalg.norm(chi) or step < 1e-3:
                break
            step *= 0.5
        a, Q_c, chi = trial, trial_Q, trial_chi
    else:
        if np.linalg.norm(chi) > NEWTON_TOLERANCE:
            raise OutOfChartError(
                f"invariant coordinates did not converge in {NEWTON_MAX_ITERATIONS} "
                f"iterations (|chi| = {np.linalg.norm(chi):.3e})"
            )
    if not chart.contains(a):
        raise OutOfChartError(f"group element {a} outside the chart")

    x = np.atleast_1d(np.asarray(model.base_guess(Q_c), dtype=float))
    for _ in range(20):
        jet = evaluate_jet(model.section, x)
        dx = np.linalg.lstsq(jet.jacobian, Q_c - jet.value, rcond=None)[0]
        x = x + dx
        if np.linalg.norm(dx) <= 1e-15 * max(1.0, np.linalg.norm(x)):
            break
    miss = np.linalg.norm(np.asarray(model.section(x)) - Q_c)
    if miss > 1e-10:
        raise OutOfChartError(f"point is off the section's neighbourhood (miss {miss:.3e})")
    f_tilde = np.asarray(model.action_V(f, chart.inverse(a)), dtype=float).reshape(model.n_V)
    logger.debug(f"invariant coordinates: x={x}, a={a}, iterations={iteration + 1}")
    return x, a, f_tilde


def check_invariants(
    model: ModelSpec, points: Iterable[Tuple[np.ndarray, np.ndarray]], tolerance: float = 1e-10
) -> CheckReport:
    """Orbit-metric, horizontal-metric, projector and block-metric invariants."""
    report = CheckReport()
    for x, f_tilde in points:
        gp = geometry_point(model, x, f_tilde)
        record_invariants(gp, report, tolerance)
    report.log_summary(f"bundle invariants ({model.name})")
    return report


def record_invariants(gp: GeometryPoint, report: CheckReport, tolerance: float = 1e-10) -> None:
    model = gp.model
    point = np.concatenate([gp.x, gp.f_tilde])
    n_P, n_V, n_x, n_q = model.n_P, model.n_V, model.n_x, model.n_q
    Y, K_P, K_V = gp.Y, gp.K_P, gp.K_V
    pr = gp.projectors
    orbit = gp.orbit

    report.record("section_gauge", np.asarray(model.gauge(gp.Q_star)), tolerance, point)
    report.record("section_hessian_symmetry", gp.section.symmetry_residual(), tolerance, point)
    report.record(
        "orbit_symmetry",
        [orbit.gamma - orbit.gamma.T, orbit.d_lower - orbit.d_lower.T],
        tolerance,
        point,
    )
    report.record(
        "orbit_inverse", orbit.d_upper @ orbit.d_lower - np.eye(model.n_G), tolerance, point
    )
    report.record("horizontal_P_vertical", gp.G_H @ K_P, tolerance, point)
    report.record("horizontal_tilde_vertical", gp.G_tilde_H @ gp.K_tilde, tolerance, point)
    report.record("horizontal_symmetry", gp.G_tilde_H - gp.G_tilde_H.T, tolerance, point)

    report.record("N_image", pr.N_PP @ Y - Y, tolerance, point)
    report.record("N_VP_section", pr.N_VP @ Y, tolerance, point)
    report.record("N_idempotent", pr.N_PP @ pr.N_PP - pr.N_PP, tolerance, point)
    report.record("N_vertical", pr.N_tilde @ gp.K_tilde, tolerance, point)
    report.record("N_metric_vs_gauge", pr.N_metric - pr.N_PP, 1e-9, point)
    report.record("T_left_inverse", pr.T @ Y - np.eye(n_x), tolerance, point)
    report.record("T_projector", Y @ pr.T - pr.P_perp, tolerance, point)
    report.record("P_perp_vertical", pr.P_perp @ K_P, tolerance, point)
    report.record("P_orth_vertical", pr.P_orth @ K_P, tolerance, point)
    report.record("Pi_tilde_idempotent", pr.Pi_tilde @ pr.Pi_tilde - pr.Pi_tilde, 1e-9, point)
    report.record("Pi_tilde_absorption", pr.N_tilde @ pr.Pi_tilde - pr.N_tilde, 1e-9, point)

    H = gp.block.matrix()
    H_inv = gp.block.inverse()
    report.record("block_symmetry", [H - H.T, H_inv - H_inv.T], tolerance, point)
    report.record("block_inverse", H @ H_inv - np.eye(n_q), tolerance, point)
    lift_T = np.zeros((n_q, n_P + n_V))
    lift_T[:n_x, :n_P] = pr.T @ pr.N_PP
    lift_T[n_x:, :n_P] = pr.N_VP
    lift_T[n_x:, n_P:] = np.eye(n_V)
    report.record(
        "block_inverse_factorized",
        lift_T @ gp.G_tilde_inverse @ lift_T.T - H_inv,
        tolerance,
        point,
    )
