"""Linearization and discretization against independent numerical oracles."""

import numpy as np
import pytest

from tritank import (
    ContinuousModel,
    DiscreteModel,
    OperatingPoint,
    discretize,
    from_deviation,
    jacobian_at,
    to_deviation,
)
from tritank.plant import derivatives
from conftest import random_admissible_levels


class TestOperatingPoint:
    def test_valid(self, op):
        assert op.u0.shape == (2,) and op.y0.shape == (3,)

    @pytest.mark.parametrize(
        "bad",
        [
            [0.2, 0.3, 0.4],  # wrong ordering
            [0.4, 0.2, 0.4],  # h1 == h3
            [0.4, 0.3, 0.3],  # h3 == h2
            [0.4, 0.0, 0.3],  # empty tank 2
        ],
    )
    def test_rejects_bad_levels(self, bad):
        with pytest.raises(ValueError):
            OperatingPoint(np.array([1e-5, 1e-5]), np.array(bad))


class TestJacobian:
    def test_corner_entry_value(self, params, y0):
        cm = jacobian_at(params, y0)
        expected = -params.mu13 * params.pipe_area * np.sqrt(2 * params.gravity) / (
            2 * params.tank_area * np.sqrt(0.1)
        )
        assert cm.F[0, 0] == pytest.approx(expected, rel=1e-12)
        assert cm.F[0, 0] == pytest.approx(-1.1369e-2, rel=1e-4)

    def test_zero_entry_first_row(self, params, y0):
        assert jacobian_at(params, y0).F[0, 1] == 0.0

    def test_input_matrix_structure(self, params, y0):
        cm = jacobian_at(params, y0)
        assert cm.B[0, 0] == pytest.approx(64.935, rel=1e-4)
        assert cm.B[0, 0] == cm.B[1, 1] == 1.0 / params.tank_area
        assert cm.B[0, 1] == cm.B[1, 0] == cm.B[2, 0] == cm.B[2, 1] == 0.0
        np.testing.assert_array_equal(cm.C, np.eye(3))

    def test_mass_flow_cancellation(self, params, y0):
        F = jacobian_at(params, y0).F
        assert F[0, 0] + F[2, 0] == 0.0
        # the tank-1 coupling part of F[2,2] cancels F[0,2]; together with
        # the tank-2 coupling it reconstructs the diagonal entry
        assert F[2, 2] == -(F[0, 2] + F[2, 1])

    def test_rejects_bad_ordering(self, params):
        with pytest.raises(ValueError):
            jacobian_at(params, np.array([0.2, 0.3, 0.4]))

    def test_matches_finite_differences(self, params):
        rng = np.random.default_rng(11)
        pts = random_admissible_levels(rng, params, 100)
        u = np.zeros(2)
        delta = 1e-6
        for y in pts:
            F = jacobian_at(params, y).F
            fd = np.empty((3, 3))
            for j in range(3):
                e = np.zeros(3)
                e[j] = delta
                fd[:, j] = (derivatives(y + e, u, params) - derivatives(y - e, u, params)) / (2 * delta)
            rel = np.abs(fd - F).max() / np.abs(F).max()
            assert rel < 1e-4


def _taylor_expm(M, terms=20):
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, terms + 1):
        term = term @ M / k
        out = out + term
    return out


class TestDiscretize:
    def test_zero_dynamics(self):
        cm = ContinuousModel(F=np.zeros((3, 3)), B=np.array([[1.0, 0], [0, 1.0], [0, 0]]), C=np.eye(3))
        dm = discretize(cm, 2.5)
        np.testing.assert_allclose(dm.A, np.eye(3), atol=1e-15)
        np.testing.assert_allclose(dm.B, 2.5 * cm.B, atol=1e-15)

    def test_scalar_closed_form(self):
        cm = ContinuousModel(F=np.array([[-1.0]]), B=np.array([[1.0]]), C=np.array([[1.0]]))
        dm = discretize(cm, 1.0)
        assert dm.A[0, 0] == pytest.approx(np.exp(-1.0), abs=1e-12)

    def test_matches_taylor_series_oracle(self, params, y0):
        cm = jacobian_at(params, y0)
        dm = discretize(cm, 1.0)
        M = np.zeros((5, 5))
        M[:3, :3] = cm.F
        M[:3, 3:] = cm.B
        E = _taylor_expm(M)
        assert np.abs(dm.A - E[:3, :3]).max() < 1e-12
        assert np.abs(dm.B - E[:3, 3:]).max() < 1e-12

    def test_matches_fine_rk4_of_linear_system(self, params, y0):
        cm = jacobian_at(params, y0)
        dm = discretize(cm, 1.0)
        rng = np.random.default_rng(3)
        for _ in range(5):
            x = 0.05 * rng.standard_normal(3)
            u = 2e-5 * rng.standard_normal(2)

            def f(xx):
                return cm.F @ xx + cm.B @ u

            xr = x.copy()
            dt = 1e-3
            for _ in range(1000):
                k1 = f(xr)
                k2 = f(xr + 0.5 * dt * k1)
                k3 = f(xr + 0.5 * dt * k2)
                k4 = f(xr + dt * k3)
                xr = xr + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            assert np.abs(dm.A @ x + dm.B @ u - xr).max() < 1e-8

    def test_rejects_bad_ts(self, params, y0):
        with pytest.raises(ValueError):
            discretize(jacobian_at(params, y0), 0.0)

    def test_discrete_model_validation(self):
        with pytest.raises(ValueError):
            DiscreteModel(A=np.zeros((2, 2)), B=np.zeros((2, 1)), C=np.eye(2), t_s=1.0)


class TestDeviationVariables:
    def test_at_operating_point(self, op):
        y, u = to_deviation(op.y0, op.u0, op)
        assert np.all(y == 0.0) and np.all(u == 0.0)

    def test_round_trip_machine_exact(self, op):
        # (Y - y0) + y0 re-rounds, so demand equality to the last ulp rather
        # than bitwise identity.
        rng = np.random.default_rng(5)
        for _ in range(100):
            Y = rng.uniform(0, 0.6, 3)
            U = rng.uniform(0, 1e-4, 2)
            y, u = to_deviation(Y, U, op)
            Y2, U2 = from_deviation(y, u, op)
            assert np.all(np.abs(Y2 - Y) <= np.spacing(np.maximum(np.abs(Y), op.y0)))
            assert np.all(np.abs(U2 - U) <= np.spacing(np.maximum(np.abs(U), op.u0)))

    def test_known_offset(self, op):
        y, _ = to_deviation(np.array([0.5, 0.3, 0.4]), op.u0, op)
        np.testing.assert_allclose(y, [0.1, 0.1, 0.1], atol=1e-15)
