"""Plant physics: flow laws, mass balance, integrator behavior.

Expected values were frozen from a scalar evaluation of the flow formulas
performed independently before the implementation.
"""

import numpy as np
import pytest

from tritank import PlantParams, derivatives, equilibrium_input, flow_between, outflow, step
from tritank.plant import rk4_step

# Frozen oracle values (Torricelli formula evaluated by hand for the default
# rig constants, g = 9.81).
FLOW_04_03 = 3.501785258978627e-05
OUTFLOW_02 = 6.685567477783769e-05
EQ_LEVELS = np.array([0.4, 0.2, 0.3])
EQ_INPUT = np.array([3.501785258978627e-05, 3.1837822188051433e-05])


class TestFlows:
    def test_flow_oracle_value(self, params):
        assert flow_between(0.4, 0.3, 0.5, params) == pytest.approx(FLOW_04_03, rel=1e-12)

    def test_flow_zero_head(self, params):
        assert flow_between(0.3, 0.3, 0.5, params) == 0.0

    def test_flow_antisymmetry_example(self, params):
        assert flow_between(0.3, 0.4, 0.5, params) == pytest.approx(-FLOW_04_03, rel=1e-12)

    def test_flow_antisymmetry_sweep(self, params):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a, b = rng.uniform(0.0, params.h_max, 2)
            assert flow_between(a, b, 0.5, params) == -flow_between(b, a, 0.5, params)

    def test_flow_tiny_head_is_zero(self, params):
        assert flow_between(0.3 + 1e-13, 0.3, 0.5, params) == 0.0

    def test_outflow_empty_tank(self, params):
        assert outflow(0.0, params) == 0.0

    def test_outflow_oracle_value(self, params):
        assert outflow(0.2, params) == pytest.approx(OUTFLOW_02, rel=1e-12)

    def test_outflow_sqrt_scaling(self, params):
        assert outflow(0.8, params) == pytest.approx(2.0 * outflow(0.2, params), rel=1e-12)

    def test_outflow_monotone(self, params):
        hs = np.linspace(0.0, params.h_max, 50)
        vals = [outflow(h, params) for h in hs]
        assert np.all(np.diff(vals) > 0.0)


class TestDerivatives:
    def test_equilibrium_is_stationary(self, params):
        dh = derivatives(EQ_LEVELS, EQ_INPUT, params)
        assert np.max(np.abs(dh)) < 1e-12

    def test_empty_rig_at_rest(self, params):
        assert np.all(derivatives(np.zeros(3), np.zeros(2), params) == 0.0)

    def test_unforced_tank1_drain_rate(self, params):
        dh = derivatives(EQ_LEVELS, np.zeros(2), params)
        assert dh[0] == pytest.approx(-FLOW_04_03 / params.tank_area, rel=1e-12)
        assert dh[0] == pytest.approx(-2.2739e-3, rel=1e-4)

    def test_equal_levels_only_drain(self, params):
        dh = derivatives(np.array([0.3, 0.3, 0.3]), np.zeros(2), params)
        assert dh[0] == 0.0 and dh[2] == 0.0 and dh[1] < 0.0

    def test_equilibrium_input_helper(self, params):
        np.testing.assert_allclose(equilibrium_input(EQ_LEVELS, params), EQ_INPUT, rtol=1e-12)

    def test_equilibrium_input_unbalanced_tank3(self, params):
        with pytest.raises(ValueError):
            equilibrium_input(np.array([0.5, 0.2, 0.3]), params)


class TestStep:
    def test_equilibrium_fixed_point(self, params):
        h = step(EQ_LEVELS, EQ_INPUT, 1.0, params)
        assert np.max(np.abs(h - EQ_LEVELS)) < 1e-9

    def test_halfstep_composition_order(self, params):
        # One full RK4 step differs from two half steps by O(dt^5).
        h0 = np.array([0.45, 0.15, 0.30])
        u = np.array([5e-5, 2e-5])
        full = rk4_step(h0, u, 1.0, params)
        halves = rk4_step(rk4_step(h0, u, 0.5, params), u, 0.5, params)
        diff = np.max(np.abs(full - halves))
        assert 0.0 < diff < 1e-8

    def test_level_clamped_to_h_max(self, params):
        h = rk4_step(np.array([0.7, 0.0, 0.0]), np.zeros(2), 0.1, params)
        assert h[0] == params.h_max
        # with sub-stepping the level keeps draining after the clamp but
        # never exceeds the limit
        h = step(np.array([0.7, 0.0, 0.0]), np.zeros(2), 1.0, params)
        assert np.all(h <= params.h_max)

    def test_input_clamped_before_integration(self, params):
        a = step(EQ_LEVELS, np.array([10.0, -1.0]), 1.0, params)
        b = step(EQ_LEVELS, np.array([params.q_max, 0.0]), 1.0, params)
        np.testing.assert_array_equal(a, b)

    def test_rejects_nonfinite(self, params):
        with pytest.raises(ValueError):
            step(np.array([np.nan, 0.1, 0.1]), np.zeros(2), 1.0, params)
        with pytest.raises(ValueError):
            step(EQ_LEVELS, np.zeros(2), 0.0, params)
        with pytest.raises(ValueError):
            step(EQ_LEVELS, np.zeros(2), np.inf, params)

    def test_deterministic(self, params):
        a = step(EQ_LEVELS, EQ_INPUT, 7.3, params)
        b = step(EQ_LEVELS, EQ_INPUT, 7.3, params)
        np.testing.assert_array_equal(a, b)


class TestTrajectoryProperties:
    def test_mass_conservation_without_drain(self):
        params = PlantParams(mu20=0.0)  # plugged drain: closed system
        h = np.array([0.5, 0.1, 0.3])
        mass0 = params.tank_area * h.sum()
        for _ in range(10_000):
            h = rk4_step(h, np.zeros(2), 1.0, params)
        assert abs(params.tank_area * h.sum() - mass0) < 1e-9

    def test_monotone_drain(self, params):
        h = np.array([0.5, 0.2, 0.35])
        total = [h.sum()]
        for _ in range(500):
            h = rk4_step(h, np.zeros(2), 1.0, params)
            total.append(h.sum())
        assert np.all(np.diff(total) <= 0.0)

    def test_rk4_convergence_order(self, params):
        h0 = np.array([0.45, 0.15, 0.30])
        u = np.array([5e-5, 2e-5])

        def integrate(dt):
            h = h0
            for _ in range(int(round(10.0 / dt))):
                h = rk4_step(h, u, dt, params)
            return h

        e1 = np.linalg.norm(integrate(0.5) - integrate(0.25))
        e2 = np.linalg.norm(integrate(0.25) - integrate(0.125))
        order = np.log2(e1 / e2)
        assert order >= 3.9
