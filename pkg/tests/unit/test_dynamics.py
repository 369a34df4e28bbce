#!/usr/bin/env python3
"""
Unit tests for the reduced and full-space equations of motion
"""

import numpy as np
import pytest

from reduction_engine import dynamics
from reduction_engine.bundle import dynamics_point, geometry_point
from reduction_engine.calculus import evaluate_jet
from reduction_engine.dynamics import (
    FullState,
    ReducedState,
    ReducedSystem,
    energy,
    full_energy,
    full_rhs,
    initial_lift,
    lagrangian_rhs,
    project_full_state,
    reduced_rhs,
)
from reduction_engine.errors import DomainError, ShapeError
from reduction_engine.models import instantiate


def _translate(model, s: FullState, a) -> FullState:
    """Act on a full state with the group element a (velocities pushed forward)."""
    J_P = evaluate_jet(lambda z: model.action_P(z, a), s.Q).jacobian
    moved_f = np.asarray(model.action_V(s.f, a), dtype=float).reshape(model.n_V)
    if model.n_V:
        J_V = evaluate_jet(lambda z: model.action_V(z, a), s.f).jacobian
        fdot = J_V @ s.fdot
    else:
        fdot = s.fdot
    return FullState(
        Q=np.asarray(model.action_P(s.Q, a), dtype=float),
        f=moved_f,
        Qdot=J_P @ s.Qdot,
        fdot=fdot,
    )


class TestReducedState:

    def test_vector_layout(self, so3):
        s = ReducedState.build(so3, [1, 2], [3, 4, 5], [6, 7], [8, 9, 10], [11, 12, 13])
        assert s.to_vector().tolist() == list(range(1, 14))
        again = ReducedState.from_vector(so3, s.to_vector())
        assert np.array_equal(again.p, s.p)
        assert np.array_equal(s.q, [1, 2, 3, 4, 5])

    def test_wrong_size(self, so3):
        with pytest.raises(ShapeError):
            ReducedState.from_vector(so3, np.zeros(12))
        with pytest.raises(ShapeError):
            ReducedState.build(so3, [0.0], [0, 0, 0], [0, 0], [0, 0, 0], [0, 0, 0])

    def test_non_finite_entries(self, abelian):
        with pytest.raises(DomainError):
            ReducedState.build(abelian, [1.0], [0.0, np.inf], [0.0], [0.0, 0.0], [0.0])


class TestReducedEquations:

    def test_flat_product_closed_form(self, flat):
        """h~ = diag(1, 1, 1/2) and V = (x^2 + f~^2) / 2 on the section"""
        s = ReducedState.build(flat, [0.3, -0.2], [0.4], [0.0, 0.0], [0.0], [0.7])
        rate = reduced_rhs(flat, s)
        assert rate.xdot == pytest.approx([-0.3, 0.2])
        assert rate.fdot == pytest.approx([-0.8])
        assert rate.p == pytest.approx([0.0])

    def test_flat_product_energy(self, flat):
        """d = 2, so the vertical energy is p^2 / 4"""
        s = ReducedState.build(flat, [0.3, -0.2], [0.4], [0.0, 0.0], [0.0], [0.7])
        assert energy(flat, s) == pytest.approx(0.5 * (0.09 + 0.04 + 0.16) + 0.49 / 4)

    def test_abelian_momentum_is_conserved(self, abelian, state_factory):
        for _ in range(5):
            assert reduced_rhs(abelian, state_factory(abelian)).p == pytest.approx([0.0])

    def test_static_energy_is_potential(self, so3):
        s = ReducedState.build(so3, [0.2, 0.1], [0.3, 0.0, 0.4], [0, 0], [0, 0, 0], [0, 0, 0])
        ff = 0.25
        expected = 0.5 * ff + 0.5 * 0.05 + 0.1 * 0.2 * ff
        assert energy(so3, s) == pytest.approx(expected)

    def test_matches_lagrange_poincare_solve(self, any_model, sample_states):
        """Compact equations agree with a direct solve of the reduced Lagrangian"""
        for s in sample_states:
            compact = reduced_rhs(any_model, s).to_vector()
            direct = lagrangian_rhs(any_model, s).to_vector()
            assert np.allclose(compact, direct, atol=1e-7)

    def test_equilibrium(self, so3):
        s = ReducedState.build(so3, [0, 0], [0, 0, 0], [0, 0], [0, 0, 0], [0, 0, 0])
        assert np.max(np.abs(reduced_rhs(so3, s).to_vector())) == 0.0


class TestFullSpace:

    def test_free_motion(self):
        model = instantiate("flat_product", {"k": 0.0})
        s = FullState(Q=np.array([0.1, 0.2, 0.3]), f=np.array([0.4]),
                      Qdot=np.array([1.0, -1.0, 0.5]), fdot=np.array([0.2]))
        rate = full_rhs(model, s)
        assert np.array_equal(rate.Q, s.Qdot)
        assert np.max(np.abs(rate.Qdot)) == 0.0

    def test_energy_matches_reduced(self, any_model, sample_states):
        for s in sample_states:
            assert full_energy(any_model, initial_lift(any_model, s)) == pytest.approx(
                energy(any_model, s), abs=1e-12
            )

    def test_lift_then_project(self, any_model, sample_states):
        for s in sample_states:
            back = project_full_state(any_model, initial_lift(any_model, s))
            assert np.allclose(back.to_vector(), s.to_vector(), atol=1e-9)

    def test_projection_is_invariant(self, any_model, sample_states, rng):
        """A group-translated full state projects to the same reduced state"""
        for s in sample_states:
            full = initial_lift(any_model, s)
            a = any_model.chart.exp(rng.uniform(-0.8, 0.8, any_model.n_G))
            moved = project_full_state(any_model, _translate(any_model, full, a))
            assert np.allclose(moved.to_vector(), s.to_vector(), atol=1e-9)

    def test_pure_orbit_velocity(self, so3):
        """Velocity K~ v on the section has zero shape velocity and p = d v"""
        s = ReducedState.build(so3, [0.1, -0.1], [0.2, 0.3, 0.1], [0, 0], [0, 0, 0], [0, 0, 0])
        full = initial_lift(so3, s)
        gp = geometry_point(so3, s.x, s.f_tilde)
        v = np.array([0.3, -0.2, 0.1])
        spinning = FullState(Q=full.Q, f=full.f, Qdot=gp.K_P @ v, fdot=gp.K_V @ v)
        reduced = project_full_state(so3, spinning)
        assert np.allclose(reduced.qdot, 0.0, atol=1e-12)
        assert reduced.p == pytest.approx(gp.orbit.d_lower @ v)


class TestDynamicsPoint:

    def test_agrees_with_geometry_point(self, any_model, sample_states):
        for s in sample_states:
            gp = geometry_point(any_model, s.x, s.f_tilde)
            point = dynamics_point(any_model, s.x, s.f_tilde)
            assert np.allclose(point.h, gp.block.matrix(), atol=1e-12)
            assert np.allclose(point.A_q, gp.A_q, atol=1e-12)
            assert np.allclose(point.d_upper, gp.orbit.d_upper, atol=1e-12)
            assert np.allclose(point.dh, gp.dh, atol=1e-10)
            assert np.allclose(point.dA, gp.dA, atol=1e-10)
            assert np.allclose(point.dd_upper, gp.dd_upper, atol=1e-10)
            assert np.allclose(point.dV, gp.dV, atol=1e-10)
            assert point.potential == pytest.approx(gp.potential, abs=1e-14)

    def test_value_only(self, so3):
        point = dynamics_point(so3, [0.2, -0.1], [0.3, 0.1, -0.2], derivatives=False)
        assert point.dh is None and point.dV is None
        full = dynamics_point(so3, [0.2, -0.1], [0.3, 0.1, -0.2])
        assert np.allclose(point.h, full.h, atol=1e-14)


class TestReducedSystem:

    def test_rhs_matches_reduced_rhs(self, any_model, sample_states):
        system = ReducedSystem(any_model)
        for s in sample_states:
            assert np.allclose(
                system.rhs(0.0, s.to_vector()), reduced_rhs(any_model, s).to_vector(), atol=1e-12
            )
            assert system.energy(s.to_vector()) == pytest.approx(energy(any_model, s), abs=1e-12)

    def test_energy_and_rhs_share_one_evaluation(self, so3, state_factory, mocker):
        spy = mocker.spy(dynamics, "dynamics_point")
        system = ReducedSystem(so3)
        y = state_factory(so3).to_vector()
        system.energy(y)
        system.rhs(0.0, y)
        moved = y.copy()
        moved[0] += 1e-3
        system.rhs(0.0, moved)
        assert spy.call_count == 2

    def test_velocity_change_reuses_configuration(self, abelian, state_factory):
        system = ReducedSystem(abelian)
        s = state_factory(abelian)
        first = system.point(s)
        faster = ReducedState.build(abelian, s.x, s.f_tilde, 2 * s.xdot, s.fdot, s.p)
        assert system.point(faster) is first
