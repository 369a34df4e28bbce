#!/usr/bin/env python3
"""
Unit tests for the bundle geometry: orbit metrics, projectors, block metric
"""

import numpy as np
import pytest

from reduction_engine.bundle import (
    base_metric,
    block_metric,
    check_invariants,
    geometry_point,
    horizontal_metrics,
    invariant_coordinates,
    orbit_metrics,
)
from reduction_engine.calculus import central_difference, fd_check
from reduction_engine.errors import DegeneracyError, DomainError
from reduction_engine.models import ambient_samples, sample_points


class TestAbelianClosedForm:

    def test_connection_and_orbit_metric(self, abelian):
        """At x = r, f~ = (rho, sigma): d = r^2 + rho^2 + sigma^2"""
        r, rho, sigma = 1.5, 0.4, -0.3
        gp = geometry_point(abelian, [r], [rho, sigma])
        d = r**2 + rho**2 + sigma**2
        np.testing.assert_allclose(gp.orbit.d_lower, [[d]])
        assert gp.A_P == pytest.approx(np.array([[0.0, r / d]]))
        assert gp.A_V == pytest.approx(np.array([[-sigma / d, rho / d]]))

    def test_block_metric(self, abelian):
        r, rho, sigma = 1.5, 0.4, -0.3
        block = block_metric(abelian, [r], [rho, sigma])
        d = r**2 + rho**2 + sigma**2
        K_V = np.array([-sigma, rho])
        np.testing.assert_allclose(block.h_tilde, [[1.0]])
        assert block.cross == pytest.approx(np.zeros((1, 2)))
        assert np.allclose(block.vv, np.eye(2) - np.outer(K_V, K_V) / d, atol=1e-14)

    def test_section_outside_domain(self, abelian):
        with pytest.raises(DomainError):
            geometry_point(abelian, [0.0], [0.1, 0.2])

    def test_degenerate_orbit(self, abelian):
        """The origin of P x V is a fixed point of the action"""
        with pytest.raises(DegeneracyError):
            orbit_metrics(abelian, np.zeros(2), np.zeros(2))


class TestInvariants:

    def test_all_models(self, any_model, rng):
        report = check_invariants(any_model, sample_points(any_model, 10, rng))
        assert report.passed, report.failures()
        assert "block_inverse_factorized" in report.names()

    def test_without_fiber(self, flat_bare):
        gp = geometry_point(flat_bare, [0.3, -0.2], [])
        assert gp.block.matrix() == pytest.approx(np.eye(2))
        assert gp.A_q.shape == (1, 2)
        assert check_invariants(flat_bare, [(np.array([0.3, -0.2]), np.zeros(0))]).passed

    def test_oblique_and_orthogonal_projectors(self, so3, abelian):
        """The coupled model has a section that is not G-orthogonal to the orbits"""
        coupled = geometry_point(so3, [0.2, -0.1], [0.3, 0.1, -0.2]).projectors
        assert np.max(np.abs(coupled.P_perp - coupled.P_orth)) > 1e-3
        plain = geometry_point(abelian, [1.2], [0.3, 0.1]).projectors
        assert np.allclose(plain.P_perp, plain.P_orth, atol=1e-12)

    def test_metric_projector_equals_gauge_projector(self, so3):
        pr = geometry_point(so3, [0.1, 0.4], [0.5, -0.2, 0.1]).projectors
        assert np.allclose(pr.N_metric, pr.N_PP, atol=1e-9)


class TestInvariantCoordinates:

    def test_recovers_group_translate(self, any_model, rng):
        """Translating a section point by a is undone exactly"""
        for x, f_tilde in sample_points(any_model, 5, rng):
            a = any_model.chart.exp(rng.uniform(-1.0, 1.0, any_model.n_G))
            Q = np.asarray(any_model.action_P(np.asarray(any_model.section(x)), a), dtype=float)
            f = np.asarray(any_model.action_V(f_tilde, a), dtype=float)
            x_out, a_out, f_out = invariant_coordinates(any_model, Q, f)
            assert np.allclose(x_out, x, atol=1e-9)
            assert np.allclose(a_out, a, atol=1e-9)
            assert np.allclose(f_out, f_tilde, atol=1e-9)

    def test_polar_coordinates(self, abelian):
        x, a, f_tilde = invariant_coordinates(abelian, np.array([0.0, 2.0]), np.array([1.0, 0.0]))
        assert x == pytest.approx([2.0])
        assert a == pytest.approx([np.pi / 2])
        assert f_tilde == pytest.approx([0.0, -1.0], abs=1e-12)


class TestHorizontalMetrics:

    def test_abelian_values(self, abelian):
        """At Q = (r, 0), f = (rho, 0) the orbit direction is the Q2 axis"""
        r, rho = 1.5, 0.4
        G_H, G_tilde_H = horizontal_metrics(abelian, np.array([r, 0.0]), np.array([rho, 0.0]))
        np.testing.assert_allclose(G_H, np.diag([1.0, 0.0]), atol=1e-14)
        np.testing.assert_allclose(
            G_tilde_H[:2, :2], np.diag([1.0, rho**2 / (r**2 + rho**2)]), atol=1e-14
        )

    def test_annihilates_orbit_directions(self, so3, rng):
        for Q, f in ambient_samples(so3, 3, rng):
            G_H, G_tilde_H = horizontal_metrics(so3, Q, f)
            K_P = np.asarray(so3.killing_P(Q), dtype=float).reshape(so3.n_P, so3.n_G)
            K_V = np.asarray(so3.killing_V(f), dtype=float).reshape(so3.n_V, so3.n_G)
            assert np.allclose(G_H @ K_P, 0.0, atol=1e-10)
            assert np.allclose(G_tilde_H @ np.vstack([K_P, K_V]), 0.0, atol=1e-10)
            assert np.allclose(G_tilde_H, G_tilde_H.T, atol=1e-12)


class TestBaseMetric:

    @pytest.mark.parametrize("r", [0.6, 1.0, 1.8])
    def test_abelian_is_unit(self, abelian, twisted, r):
        """The radius is an arc-length coordinate on the orbit space"""
        for model in (abelian, twisted):
            h, h_inv = base_metric(model, np.array([r]))
            np.testing.assert_allclose(h, [[1.0]], atol=1e-12)
            np.testing.assert_allclose(h_inv, [[1.0]], atol=1e-12)

    def test_pullback_against_differences(self, so3, rng):
        for x, _ in sample_points(so3, 3, rng):
            Q = np.asarray(so3.section(x), dtype=float)
            Y = central_difference(so3.section, x, 1e-6)
            G_H, _ = horizontal_metrics(so3, Q, np.zeros(so3.n_V))
            h, h_inv = base_metric(so3, x)
            assert np.allclose(h, Y.T @ G_H @ Y, atol=1e-7)
            assert np.allclose(h @ h_inv, np.eye(so3.n_x), atol=1e-10)


class TestTwistedSection:

    alpha = 0.4

    def test_section_derivatives(self, twisted):
        report = fd_check(twisted.section, [1.3], h=1e-5, tolerance=1e-6, second_order=True)
        assert report.passed, report.failures()

    def test_block_metric_closed_form(self, twisted):
        r, rho, sigma = 1.2, 0.4, -0.3
        a = self.alpha
        d = r**2 + rho**2 + sigma**2
        block = block_metric(twisted, [r], [rho, sigma])
        h_xx = 1.0 + 4 * a**2 * r**4 - 4 * a**2 * r**6 / d
        np.testing.assert_allclose(block.h_tilde, [[h_xx]], rtol=1e-12)
        np.testing.assert_allclose(
            block.cross, -(2 * a * r**3 / d) * np.array([[-sigma, rho]]), atol=1e-12
        )
        K_V = np.array([-sigma, rho])
        assert np.allclose(block.vv, np.eye(2) - np.outer(K_V, K_V) / d, atol=1e-12)

    def test_connection_base_component(self, twisted):
        r, rho, sigma = 0.9, -0.2, 0.5
        d = r**2 + rho**2 + sigma**2
        gp = geometry_point(twisted, [r], [rho, sigma])
        assert gp.A_q[0, 0] == pytest.approx(2 * self.alpha * r**3 / d, rel=1e-12)
        assert gp.A_q[0, 1:] == pytest.approx([-sigma / d, rho / d], abs=1e-12)

    def test_untwisted_connection_has_no_base_component(self, abelian):
        gp = geometry_point(abelian, [0.9], [-0.2, 0.5])
        assert gp.A_q[0, 0] == pytest.approx(0.0, abs=1e-14)

    def test_outside_domain(self, twisted):
        with pytest.raises(DomainError):
            geometry_point(twisted, [-0.5], [0.1, 0.2])
