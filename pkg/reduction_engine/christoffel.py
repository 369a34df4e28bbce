#!/usr/bin/env python3
"""
Christoffel symbols of the block metric and the transformation identities

Lowered symbols are stored as L[J, K, M] = Gamma_{JKM} (symmetric in J, K),
raised symbols as R[L, J, K] = Gamma^L_{JK}, both over q = (x, f~). The named
families are slices: Latin letters run over x, early Latin letters over f~.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Tuple

import numpy as np

from . import gaugefield
from .bundle import GeometryPoint, ModelSpec, geometry_point
from .checks import CheckReport, worst
from .errors import DomainError

logger = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-8
SYMMETRY_TOLERANCE = 1e-10


def lower_christoffel(dmetric: np.ndarray) -> np.ndarray:
    """Gamma_{JKM} = 1/2 (d_J g_KM + d_K g_JM - d_M g_JK), dmetric[I, J, K] = d_K g_IJ."""
    return 0.5 * (
        np.transpose(dmetric, (2, 0, 1)) + np.transpose(dmetric, (0, 2, 1)) - dmetric
    )


@dataclass(frozen=True, eq=False)
class LoweredChristoffels:
    full: np.ndarray
    n_x: int

    def _block(self, *spans: str) -> np.ndarray:
        index = tuple(slice(None, self.n_x) if s == "x" else slice(self.n_x, None) for s in spans)
        return self.full[index]

    @property
    def jkl(self) -> np.ndarray:
        return self._block("x", "x", "x")

    @property
    def jka(self) -> np.ndarray:
        return self._block("x", "x", "v")

    @property
    def ajk(self) -> np.ndarray:
        return self._block("v", "x", "x")

    @property
    def ajb(self) -> np.ndarray:
        return self._block("v", "x", "v")

    @property
    def abk(self) -> np.ndarray:
        return self._block("v", "v", "x")

    @property
    def abc(self) -> np.ndarray:
        return self._block("v", "v", "v")


@dataclass(frozen=True, eq=False)
class ChristoffelSet:
    """Raised symbols from the inverse blocks, with their lowered sources."""

    raised: np.ndarray
    lowered: LoweredChristoffels

    def _block(self, *spans: str) -> np.ndarray:
        n_x = self.lowered.n_x
        index = tuple(slice(None, n_x) if s == "x" else slice(n_x, None) for s in spans)
        return self.raised[index]

    @property
    def i_jk(self) -> np.ndarray:
        return self._block("x", "x", "x")

    @property
    def i_aj(self) -> np.ndarray:
        return self._block("x", "v", "x")

    @property
    def i_ab(self) -> np.ndarray:
        return self._block("x", "v", "v")

    @property
    def b_ij(self) -> np.ndarray:
        return self._block("v", "x", "x")

    @property
    def b_ia(self) -> np.ndarray:
        return self._block("v", "x", "v")

    @property
    def b_ac(self) -> np.ndarray:
        return self._block("v", "v", "v")

    def contract(self, qdot: np.ndarray) -> np.ndarray:
        """Gamma^L_{JK} qdot^J qdot^K."""
        return np.einsum("LJK,J,K->L", self.raised, qdot, qdot)


def lowered_from_point(gp: GeometryPoint) -> LoweredChristoffels:
    return LoweredChristoffels(full=lower_christoffel(gp.dh), n_x=gp.model.n_x)


def christoffels_at(gp: GeometryPoint) -> ChristoffelSet:
    lowered = lowered_from_point(gp)
    raised = np.einsum("LM,JKM->LJK", gp.block.inverse(), lowered.full)
    return ChristoffelSet(raised=raised, lowered=lowered)


def lowered_christoffels(
    model: ModelSpec, x: np.ndarray, f_tilde: np.ndarray
) -> LoweredChristoffels:
    return lowered_from_point(geometry_point(model, x, f_tilde))


def raised_christoffels(model: ModelSpec, x: np.ndarray, f_tilde: np.ndarray) -> ChristoffelSet:
    return christoffels_at(geometry_point(model, x, f_tilde))


def _lift_second(gp: GeometryPoint) -> np.ndarray:
    """Second derivatives of the lift q -> (Q*(x), f~): only Q*_{jk} survives."""
    model = gp.model
    n_x, n_q = model.n_x, model.n_q
    out = np.zeros((model.n_ambient, n_q, n_q))
    out[: model.n_P, :n_x, :n_x] = gp.section.hessian
    return out


def record_identities(
    gp: GeometryPoint, report: CheckReport, tolerance: float = IDENTITY_TOLERANCE
) -> None:
    """Christoffel, projection and raising identities at one point."""
    if gp.ambient is None:
        gp = geometry_point(gp.model, gp.x, gp.f_tilde, ambient=True)
    model = gp.model
    n_P, n_x = model.n_P, model.n_x
    point = np.concatenate([gp.x, gp.f_tilde])
    amb = gp.ambient
    lift = gp.lift
    pr = gp.projectors
    block = gp.block
    symbols = christoffels_at(gp)
    lowered = symbols.lowered.full

    horizontal = lower_christoffel(amb.dG_tilde_H)
    W = np.einsum("ABS,AJ,BK->JKS", horizontal, lift, lift) + np.einsum(
        "AS,AJK->JKS", amb.G_tilde_H, _lift_second(gp)
    )
    report.record(
        "lowered_christoffel_pullback",
        lowered - np.einsum("JKS,SM->JKM", W, lift),
        tolerance,
        point,
    )
    report.record(
        "horizontal_christoffel_vertical",
        np.einsum("ABS,Sg->ABg", horizontal, gp.K_tilde),
        tolerance,
        point,
    )
    projected = np.einsum("SR,RE,JKE->SJK", pr.N_tilde, gp.G_tilde_inverse, W)
    report.record(
        "raised_christoffel_projection",
        np.einsum("SL,LJK->SJK", lift, symbols.raised) - projected,
        tolerance,
        point,
    )

    H = block.matrix()
    oracle = np.einsum("LM,JKM->LJK", np.linalg.inv(H), lowered)
    report.record("raising_oracle", symbols.raised - oracle, 1e-9, point)
    report.record(
        "christoffel_symmetry",
        worst(
            lowered - np.swapaxes(lowered, 0, 1),
            symbols.raised - np.swapaxes(symbols.raised, 1, 2),
        ),
        SYMMETRY_TOLERANCE,
        point,
    )

    G_P_inv = np.linalg.inv(gp.G_P)
    G_V_inv = gp.G_tilde_inverse[n_P:, n_P:]
    N_PP, N_VP, Y = pr.N_PP, pr.N_VP, gp.Y
    cross = N_PP @ G_P_inv @ N_VP.T
    report.record("inverse_cross_projection", Y @ block.inv_hv - cross, tolerance, point)

    F_q = gaugefield.reduced_curvature(gp)
    curv = gaugefield.curvature_field(gp)
    report.record(
        "curvature_projection",
        np.einsum("Ab,gkb->gAk", cross, curv.F_xV)
        - np.einsum("Am,mb,gkb->gAk", Y, block.inv_hv, F_q[:, :n_x, n_x:]),
        tolerance,
        point,
    )

    def project_P(grad_P, grad_V):
        return N_PP @ G_P_inv @ (N_PP.T @ grad_P + N_VP.T @ grad_V)

    def project_V(grad_P, grad_V):
        return N_VP @ G_P_inv @ (N_PP.T @ grad_P + N_VP.T @ grad_V) + G_V_inv @ grad_V

    dV_P, dV_V = amb.dV[:n_P], amb.dV[n_P:]
    dV_x, dV_v = gp.dV[:n_x], gp.dV[n_x:]
    report.record(
        "potential_projection",
        worst(
            project_P(dV_P, dV_V) - Y @ (block.inv_hh @ dV_x + block.inv_hv @ dV_v),
            project_V(dV_P, dV_V) - (block.inv_hv.T @ dV_x + block.inv_vv @ dV_v),
        ),
        tolerance,
        point,
    )

    D_amb = gaugefield.covariant_d(model.lie.c, amb.connection, amb.d_upper, amb.dd_upper)
    D_q = gaugefield.reduced_covariant_d(gp)
    M_P = N_PP @ G_P_inv @ N_PP.T
    lhs = np.einsum("AR,ksR->ksA", M_P, D_amb[:, :, :n_P]) + np.einsum(
        "Ar,ksr->ksA", cross, D_amb[:, :, n_P:]
    )
    rhs = np.einsum("Am,mi,ksi->ksA", Y, block.inv_hh, D_q[:, :, :n_x]) + np.einsum(
        "Am,mb,ksb->ksA", Y, block.inv_hv, D_q[:, :, n_x:]
    )
    report.record("covariant_d_projection", lhs - rhs, tolerance, point)

    gaugefield.record_invariants(gp, report, pullback_tolerance=tolerance)


def _suite_at(model: ModelSpec, x: np.ndarray, f_tilde: np.ndarray, tolerance: float) -> CheckReport:
    report = CheckReport()
    try:
        record_identities(geometry_point(model, x, f_tilde, ambient=True), report, tolerance)
    except DomainError as exc:
        report.errors.append(f"{type(exc).__name__} at x={np.ravel(x).tolist()}, f={np.ravel(f_tilde).tolist()}: {exc}")
    return report


def identity_suite(
    model: ModelSpec,
    sample_points: Iterable[Tuple[np.ndarray, np.ndarray]],
    tolerance: float = IDENTITY_TOLERANCE,
    workers: int = 1,
) -> CheckReport:
    """Evaluate every identity at each point; the report holds the worst residuals."""
    points: List[Tuple[np.ndarray, np.ndarray]] = list(sample_points)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(lambda p: _suite_at(model, p[0], p[1], tolerance), points))
    else:
        partials = [_suite_at(model, x, f, tolerance) for x, f in points]
    report = CheckReport()
    for partial in partials:
        report.merge(partial)
    report.log_summary(f"identity suite ({model.name}, {len(points)} points)")
    return report
