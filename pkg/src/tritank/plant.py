"""Nonlinear three-tank plant: orifice flows, mass balance, RK4 stepping.

Tank 1 and tank 2 are fed by pumps; tank 3 sits between them.  Liquid moves
from tank 1 to tank 3 and from tank 3 to tank 2 through connecting pipes, and
leaves the rig through the single outflow orifice of tank 2.  Levels are
plain length-3 numpy arrays (h1, h2, h3) in meters; pump commands are
length-2 arrays (q1, q2) in m^3/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Head differences below this are treated as exactly zero: the square-root
# flow law has unbounded slope at zero head and would otherwise chatter in
# sign at machine precision.
LEVEL_EPS = 1e-12

_POSITIVE_FIELDS = (
    "tank_area",
    "pipe_area",
    "mu13",
    "mu32",
    "gravity",
    "q_max",
    "h_max",
)


@dataclass(frozen=True)
class PlantParams:
    """Physical constants of the benchmark rig, SI units throughout.

    Defaults are the standard desk-scale rig values; ``gravity`` is not a
    rig constant but belongs here because every flow law scales with
    sqrt(2g).
    """

    tank_area: float = 0.0154  # m^2, identical for all three tanks
    pipe_area: float = 5e-5  # m^2, identical for all connecting pipes
    mu13: float = 0.5  # outflow coefficient tank 1 -> tank 3
    mu32: float = 0.5  # outflow coefficient tank 3 -> tank 2
    mu20: float = 0.675  # outflow coefficient tank 2 -> drain
    gravity: float = 9.81  # m/s^2
    q_max: float = 1.2e-4  # m^3/s, per pump
    h_max: float = 0.62  # m, per tank

    def __post_init__(self) -> None:
        for name in _POSITIVE_FIELDS:
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0.0):
                raise ValueError(f"PlantParams.{name} must be finite and > 0, got {value}")
        for name in ("mu13", "mu32", "mu20"):
            if getattr(self, name) > 1.0:
                raise ValueError(f"PlantParams.{name} must lie in (0, 1]")
        # mu20 = 0 (plugged drain) is allowed: it turns the rig into a closed
        # system, which the mass-conservation checks rely on.
        if not (np.isfinite(self.mu20) and self.mu20 >= 0.0):
            raise ValueError(f"PlantParams.mu20 must be finite and >= 0, got {self.mu20}")


def flow_between(h_a: float, h_b: float, mu: float, params: PlantParams) -> float:
    """Signed orifice flow from level ``h_a`` toward level ``h_b`` (m^3/s).

    Torricelli law: mu * Phi * sign(h_a - h_b) * sqrt(2 g |h_a - h_b|).
    Antisymmetric in (h_a, h_b).
    """
    dh = h_a - h_b
    if abs(dh) < LEVEL_EPS:
        return 0.0
    mag = mu * params.pipe_area * math.sqrt(2.0 * params.gravity * abs(dh))
    return mag if dh > 0.0 else -mag


def outflow(h2: float, params: PlantParams) -> float:
    """Drain flow out of tank 2 (m^3/s); zero for an empty tank."""
    if h2 <= 0.0:
        return 0.0
    return params.mu20 * params.pipe_area * math.sqrt(2.0 * params.gravity * h2)


def derivatives(h: np.ndarray, q: np.ndarray, params: PlantParams) -> np.ndarray:
    """Level rates ``dh/dt`` (m/s) from the mass balance of the three tanks.

    ``q`` is taken as given; clamping to pump limits is the caller's job
    (see :func:`step`).
    """
    h1, h2, h3 = float(h[0]), float(h[1]), float(h[2])
    q13 = flow_between(h1, h3, params.mu13, params)
    q32 = flow_between(h3, h2, params.mu32, params)
    q20 = outflow(h2, params)
    a = params.tank_area
    return np.array(
        [
            (float(q[0]) - q13) / a,
            (float(q[1]) + q32 - q20) / a,
            (q13 - q32) / a,
        ]
    )


def equilibrium_input(h: np.ndarray, params: PlantParams) -> np.ndarray:
    """Pump command that makes ``h`` a steady state, if one exists.

    Balances the inter-tank flows: q1 cancels the tank-1 outflow and q2
    cancels the net drain of tank 2.  The result may fall outside
    [0, q_max], in which case no admissible equilibrium input exists for
    this level triple.
    """
    h1, h2, h3 = float(h[0]), float(h[1]), float(h[2])
    q13 = flow_between(h1, h3, params.mu13, params)
    q32 = flow_between(h3, h2, params.mu32, params)
    if abs(q13 - q32) > LEVEL_EPS * params.q_max:
        raise ValueError("tank 3 cannot be balanced: q13 != q32 at the requested levels")
    return np.array([q13, outflow(h2, params) - q32])


def rk4_step(h: np.ndarray, q: np.ndarray, dt: float, params: PlantParams) -> np.ndarray:
    """One classical Runge-Kutta step of the mass balance.

    The pump command is clamped to [0, q_max] before integration and the
    resulting levels are clamped to [0, h_max] afterwards (pumps cannot run
    backwards, tanks overflow silently).
    """
    h = np.asarray(h, dtype=float)
    if not (np.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be finite and > 0, got {dt}")
    if not np.all(np.isfinite(h)):
        raise ValueError("non-finite plant state")
    qc = np.clip(np.asarray(q, dtype=float), 0.0, params.q_max)
    k1 = derivatives(h, qc, params)
    k2 = derivatives(h + 0.5 * dt * k1, qc, params)
    k3 = derivatives(h + 0.5 * dt * k2, qc, params)
    k4 = derivatives(h + dt * k3, qc, params)
    h_next = h + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return np.clip(h_next, 0.0, params.h_max)


def step(
    h: np.ndarray,
    q: np.ndarray,
    dt: float,
    params: PlantParams,
    max_substep: float = 0.1,
) -> np.ndarray:
    """Advance the plant by ``dt`` seconds under a constant pump command.

    ``dt`` is split into equal RK4 substeps no longer than ``max_substep``
    so the plant stays accurate even when the control period is long.
    Deterministic: equal inputs give bitwise-equal outputs.
    """
    if not (np.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be finite and > 0, got {dt}")
    n_sub = max(1, int(math.ceil(dt / max_substep - 1e-12)))
    sub = dt / n_sub
    out = np.asarray(h, dtype=float)
    for _ in range(n_sub):
        out = rk4_step(out, q, sub, params)
    return out
