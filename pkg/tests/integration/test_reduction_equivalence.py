#!/usr/bin/env python3
"""
Integration tests: reduced trajectories against projected full-space ones
"""

import numpy as np
import pytest

from reduction_engine.calculus import evaluate_jet
from reduction_engine.dynamics import (
    FullState,
    ReducedState,
    ReducedSystem,
    full_vector_field,
    initial_lift,
    project_full_state,
    reduced_vector_field,
)
from reduction_engine.models import instantiate
from runner.integrators import integrate, richardson_ratio

ABELIAN_STATE = dict(x=[1.0], f_tilde=[0.5, -0.2], xdot=[0.1], fdot=[0.0, 0.3], p=[0.4])
SO3_STATE = dict(
    x=[0.2, -0.1], f_tilde=[0.3, 0.1, -0.2], xdot=[0.1, 0.0], fdot=[0.0, 0.2, 0.1],
    p=[0.2, -0.1, 0.3],
)


def reduced_run(model, state, dt, t_final, **options):
    system = ReducedSystem(model)
    return integrate(system.rhs, state.to_vector(), dt, t_final, energy=system.energy, **options)


def projected_full_run(model, state, dt, t_final, **options):
    start = initial_lift(model, state).to_vector()
    full = integrate(full_vector_field(model), start, dt, t_final, **options)
    rows = [
        project_full_state(model, FullState.from_vector(model, y)).to_vector()
        for y in full.states
    ]
    return np.array(rows)


def shape_difference(model, reduced, projected):
    n = model.n_x + model.n_V
    return np.max(np.abs(reduced.states[:, :n] - projected[:, :n]))


class TestEquivalence:

    @pytest.mark.parametrize(
        "name, params, state, bound",
        [
            ("abelian_disk", None, ABELIAN_STATE, 1e-7),
            ("abelian_disk", {"twist": 0.4}, ABELIAN_STATE, 1e-7),
            ("so3_coupled", None, SO3_STATE, 1e-6),
        ],
    )
    def test_short_horizon(self, name, params, state, bound):
        model = instantiate(name, params)
        s = ReducedState.build(model, **state)
        reduced = reduced_run(model, s, 1e-3, 0.2)
        projected = projected_full_run(model, s, 1e-3, 0.2)
        assert shape_difference(model, reduced, projected) <= bound
        assert np.allclose(reduced.states[:, -model.n_G:], projected[:, -model.n_G:], atol=bound)

    def test_flat_product(self, flat, state_factory):
        s = state_factory(flat)
        reduced = reduced_run(flat, s, 1e-2, 0.5)
        projected = projected_full_run(flat, s, 1e-2, 0.5)
        assert shape_difference(flat, reduced, projected) <= 1e-9

    @pytest.mark.slow
    def test_abelian_long_horizon(self, abelian):
        s = ReducedState.build(abelian, **ABELIAN_STATE)
        reduced = reduced_run(abelian, s, 1e-4, 5.0)
        projected = projected_full_run(abelian, s, 1e-4, 5.0)
        assert shape_difference(abelian, reduced, projected) <= 1e-7

    @pytest.mark.slow
    def test_so3_long_horizon(self, so3):
        """Adaptive steps reported on the 1e-4 grid"""
        s = ReducedState.build(so3, **SO3_STATE)
        options = dict(method="rkf45", tol=1e-10)
        reduced = reduced_run(so3, s, 1e-4, 5.0, **options)
        projected = projected_full_run(so3, s, 1e-4, 5.0, **options)
        assert shape_difference(so3, reduced, projected) <= 1e-5


class TestConservation:

    def test_energy(self, so3):
        s = ReducedState.build(so3, **SO3_STATE)
        E = reduced_run(so3, s, 5e-3, 1.0).energies
        assert np.max(np.abs(E - E[0])) / max(1.0, abs(E[0])) <= 1e-6

    @pytest.mark.slow
    def test_energy_long_horizon(self, so3):
        s = ReducedState.build(so3, **SO3_STATE)
        E = reduced_run(so3, s, 1e-3, 10.0).energies
        assert np.max(np.abs(E - E[0])) / max(1.0, abs(E[0])) <= 1e-6

    @pytest.mark.slow
    @pytest.mark.parametrize("twist", [0.0, 0.4])
    def test_abelian_energy_long_horizon(self, twist):
        model = instantiate("abelian_disk", {"twist": twist})
        s = ReducedState.build(model, **ABELIAN_STATE)
        E = reduced_run(model, s, 1e-3, 10.0).energies
        assert np.max(np.abs(E - E[0])) / abs(E[0]) <= 1e-6

    def test_abelian_momentum(self, abelian):
        s = ReducedState.build(abelian, **ABELIAN_STATE)
        p = reduced_run(abelian, s, 1e-2, 10.0).states[:, -1]
        assert np.max(np.abs(p - 0.4)) <= 1e-12

    def test_equilibrium_stays_put(self, so3):
        zero = ReducedState.build(so3, [0, 0], [0, 0, 0], [0, 0], [0, 0, 0], [0, 0, 0])
        states = reduced_run(so3, zero, 1e-2, 0.5).states
        assert np.max(np.abs(states)) <= 1e-10


class TestConvergence:

    def test_reduced_system_is_fourth_order(self, abelian):
        s = ReducedState.build(abelian, **ABELIAN_STATE)
        ratio = richardson_ratio(reduced_vector_field(abelian), s.to_vector(), 1.0, 0.05)
        assert ratio == pytest.approx(16.0, abs=1.0)

    def test_equivariance(self, so3, rng):
        """Full runs from group-translated initial data project to the same curve"""
        s = ReducedState.build(so3, **SO3_STATE)
        full = initial_lift(so3, s)
        a = so3.chart.exp(rng.uniform(-0.5, 0.5, 3))
        J = evaluate_jet(lambda z: so3.action_P(z, a), full.Q).jacobian
        R = np.asarray(so3.action_V(np.eye(3), a))
        moved = FullState(
            Q=np.asarray(so3.action_P(full.Q, a)),
            f=R @ full.f,
            Qdot=J @ full.Qdot,
            fdot=R @ full.fdot,
        )
        runs = []
        for start in (full, moved):
            trajectory = integrate(full_vector_field(so3), start.to_vector(), 2e-3, 0.3)
            final = FullState.from_vector(so3, trajectory.final_state)
            runs.append(project_full_state(so3, final).to_vector())
        assert np.allclose(runs[0], runs[1], atol=1e-8)
