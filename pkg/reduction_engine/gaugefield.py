#!/usr/bin/env python3
"""
Mechanical connection, curvature and the covariant derivative of d

Curvature is stored as F[alpha, S, R] = F^alpha_{SR}, the covariant derivative
as D[kappa, sigma, R] = D_R d^{kappa sigma}. Ambient fields carry P x V
indices (P first); reduced fields carry q = (x, f~) indices.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from .bundle import GeometryPoint, ModelSpec, geometry_point
from .checks import CheckReport, worst

logger = logging.getLogger(__name__)

FIELD_TOLERANCE = 1e-10
PULLBACK_TOLERANCE = 1e-8


def curvature_from_connection(
    c: np.ndarray, connection: np.ndarray, dconnection: np.ndarray
) -> np.ndarray:
    """F^a_{SR} = d_S A^a_R - d_R A^a_S + c^a_{nm} A^n_S A^m_R.

    ``dconnection[a, R, S]`` is d_S A^a_R.
    """
    return (
        np.transpose(dconnection, (0, 2, 1))
        - dconnection
        + np.einsum("anm,nS,mR->aSR", c, connection, connection)
    )


def covariant_d(
    c: np.ndarray, connection: np.ndarray, d_upper: np.ndarray, dd_upper: np.ndarray
) -> np.ndarray:
    """D_R d^{ks} = d_R d^{ks} + c^k_{mn} A^m_R d^{ns} + c^s_{mn} A^m_R d^{nk}."""
    return (
        dd_upper
        + np.einsum("kmn,mR,ns->ksR", c, connection, d_upper)
        + np.einsum("smn,mR,nk->ksR", c, connection, d_upper)
    )


@dataclass(frozen=True, eq=False)
class ConnectionField:
    A_P: np.ndarray
    A_V: np.ndarray
    A_base: np.ndarray
    K_P: np.ndarray
    K_V: np.ndarray

    def normalization_residual(self) -> np.ndarray:
        """A K~ - identity over the block Killing field."""
        contraction = self.A_P @ self.K_P + self.A_V @ self.K_V
        return contraction - np.eye(contraction.shape[0])


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """Ambient blocks and their pullbacks by the section."""

    F_PP: np.ndarray
    F_PV: np.ndarray
    F_VP: np.ndarray
    F_VV: np.ndarray
    F_xx: np.ndarray
    F_xV: np.ndarray
    F_Vx: np.ndarray


@dataclass(frozen=True, eq=False)
class CovariantD:
    D_P: np.ndarray
    D_V: np.ndarray
    D_base: np.ndarray


def connection_field(gp: GeometryPoint) -> ConnectionField:
    return ConnectionField(
        A_P=gp.A_P,
        A_V=gp.A_V,
        A_base=gp.A_P @ gp.Y,
        K_P=gp.K_P,
        K_V=gp.K_V,
    )


def _ambient(gp: GeometryPoint) -> GeometryPoint:
    if gp.ambient is None:
        return geometry_point(gp.model, gp.x, gp.f_tilde, ambient=True)
    return gp


def ambient_curvature(gp: GeometryPoint) -> np.ndarray:
    gp = _ambient(gp)
    jets = gp.ambient
    return curvature_from_connection(gp.model.lie.c, jets.connection, jets.dconnection)


def curvature_field(gp: GeometryPoint) -> CurvatureField:
    n_P = gp.model.n_P
    F = ambient_curvature(gp)
    F_PP, F_PV = F[:, :n_P, :n_P], F[:, :n_P, n_P:]
    F_VP, F_VV = F[:, n_P:, :n_P], F[:, n_P:, n_P:]
    Y = gp.Y
    return CurvatureField(
        F_PP=F_PP,
        F_PV=F_PV,
        F_VP=F_VP,
        F_VV=F_VV,
        F_xx=np.einsum("aBR,Bk,Rl->akl", F_PP, Y, Y),
        F_xV=np.einsum("aBr,Bk->akr", F_PV, Y),
        F_Vx=np.einsum("abR,Ri->abi", F_VP, Y),
    )


def covariant_field(gp: GeometryPoint) -> CovariantD:
    n_P, n_x = gp.model.n_P, gp.model.n_x
    amb = _ambient(gp).ambient
    D = covariant_d(gp.model.lie.c, amb.connection, amb.d_upper, amb.dd_upper)
    return CovariantD(
        D_P=D[:, :, :n_P],
        D_V=D[:, :, n_P:],
        D_base=reduced_covariant_d(gp)[:, :, :n_x],
    )


def reduced_curvature(gp: GeometryPoint) -> np.ndarray:
    """F^a_{KI} over q = (x, f~), from the q-derivatives of A_q."""
    return curvature_from_connection(gp.model.lie.c, gp.A_q, gp.dA)


def reduced_covariant_d(gp: GeometryPoint) -> np.ndarray:
    return covariant_d(gp.model.lie.c, gp.A_q, gp.orbit.d_upper, gp.dd_upper)


def connection(model: ModelSpec, x: np.ndarray, f_tilde: np.ndarray) -> ConnectionField:
    return connection_field(geometry_point(model, x, f_tilde))


def curvature(model: ModelSpec, x: np.ndarray, f_tilde: np.ndarray) -> CurvatureField:
    return curvature_field(geometry_point(model, x, f_tilde, ambient=True))


def covariant_derivative_d(model: ModelSpec, x: np.ndarray, f_tilde: np.ndarray) -> CovariantD:
    return covariant_field(geometry_point(model, x, f_tilde, ambient=True))


def record_invariants(
    gp: GeometryPoint,
    report: CheckReport,
    tolerance: float = FIELD_TOLERANCE,
    pullback_tolerance: float = PULLBACK_TOLERANCE,
) -> None:
    """Connection, curvature and covariant-derivative identities at one point."""
    gp = _ambient(gp)
    n_x = gp.model.n_x
    point = np.concatenate([gp.x, gp.f_tilde])
    conn = connection_field(gp)
    curv = curvature_field(gp)
    cov = covariant_field(gp)
    F_q = reduced_curvature(gp)
    D_q = reduced_covariant_d(gp)

    def swap(F):
        return np.swapaxes(F, 1, 2)

    report.record(
        "connection_normalization", conn.normalization_residual(), tolerance, point
    )
    report.record(
        "connection_pullback",
        worst(gp.A_q[:, :n_x] - conn.A_base, gp.A_q[:, n_x:] - conn.A_V),
        tolerance,
        point,
    )
    report.record(
        "curvature_antisymmetry",
        worst(
            curv.F_xx + swap(curv.F_xx),
            curv.F_VV + swap(curv.F_VV),
            curv.F_xV + swap(curv.F_Vx),
            F_q + swap(F_q),
        ),
        tolerance,
        point,
    )
    pullbacks = {
        "curvature_pullback_xx": F_q[:, :n_x, :n_x] - curv.F_xx,
        "curvature_pullback_xV": F_q[:, :n_x, n_x:] - curv.F_xV,
        "curvature_pullback_Vx": F_q[:, n_x:, :n_x] - curv.F_Vx,
        "curvature_pullback_VV": F_q[:, n_x:, n_x:] - curv.F_VV,
    }
    for name, residual in pullbacks.items():
        report.record(name, residual, pullback_tolerance, point)

    pr = gp.projectors
    report.record(
        "curvature_replacement",
        np.einsum("abB,BR->abR", curv.F_VP, pr.N_PP)
        - np.einsum("abi,iR->abR", curv.F_Vx, pr.T),
        pullback_tolerance,
        point,
    )
    report.record(
        "covariant_d_symmetry",
        worst(cov.D_P - np.swapaxes(cov.D_P, 0, 1), cov.D_V - np.swapaxes(cov.D_V, 0, 1)),
        tolerance,
        point,
    )
    report.record(
        "covariant_d_chain",
        worst(
            D_q[:, :, :n_x] - np.einsum("ksR,Ri->ksi", cov.D_P, gp.Y),
            D_q[:, :, n_x:] - cov.D_V,
        ),
        1e-9,
        point,
    )


def check_invariants(
    model: ModelSpec,
    points: Iterable[Tuple[np.ndarray, np.ndarray]],
    tolerance: float = FIELD_TOLERANCE,
) -> CheckReport:
    report = CheckReport()
    for x, f_tilde in points:
        record_invariants(geometry_point(model, x, f_tilde, ambient=True), report, tolerance)
    report.log_summary(f"gauge field invariants ({model.name})")
    return report
