"""Jacobian linearization of the plant and exact zero-order-hold discretization.

The linear model lives in deviation variables around an operating point
(u0, y0): u = U - u0, y = Y - y0.  The Jacobian is the analytic derivative
of the plant mass balance under the level ordering h1 > h3 > h2, which makes
every sign term in the flow laws constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .plant import PlantParams

#: Minimum level gap (m) for the ordering h1 > h3 > h2 to count as strict;
#: the Jacobian of the square-root flow laws blows up at equal levels.
ORDERING_GAP = 1e-6


def _check_ordering(y0: np.ndarray) -> None:
    h1, h2, h3 = float(y0[0]), float(y0[1]), float(y0[2])
    if not (h1 - h3 > ORDERING_GAP and h3 - h2 > ORDERING_GAP):
        raise ValueError(
            f"operating levels must satisfy h1 > h3 > h2 with gaps > {ORDERING_GAP}, got {y0}"
        )
    if not h2 > ORDERING_GAP:
        raise ValueError("tank-2 level must be strictly positive at the operating point")


@dataclass(frozen=True)
class OperatingPoint:
    """Constant input/output pair the linearization is taken around."""

    u0: np.ndarray  # (2,) m^3/s
    y0: np.ndarray  # (3,) m

    def __post_init__(self) -> None:
        u0 = np.asarray(self.u0, dtype=float)
        y0 = np.asarray(self.y0, dtype=float)
        if u0.shape != (2,) or y0.shape != (3,):
            raise ValueError("operating point needs u0 of shape (2,) and y0 of shape (3,)")
        _check_ordering(y0)
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "y0", y0)


@dataclass(frozen=True)
class ContinuousModel:
    """Continuous-time linear model dx/dt = F x + B u, y = C x."""

    F: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self) -> None:
        F = np.asarray(self.F, dtype=float)
        B = np.asarray(self.B, dtype=float)
        C = np.asarray(self.C, dtype=float)
        n = F.shape[0]
        if F.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
            raise ValueError("inconsistent continuous model shapes")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n_states(self) -> int:
        return self.F.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class DiscreteModel:
    """Sampled model x(k+1) = A x(k) + B u(k), y(k) = C x(k) at period t_s."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    t_s: float

    def __post_init__(self) -> None:
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        C = np.asarray(self.C, dtype=float)
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
            raise ValueError("inconsistent discrete model shapes")
        if not self.t_s > 0.0:
            raise ValueError(f"t_s must be > 0, got {self.t_s}")
        # A comes from a matrix exponential and must be invertible.
        if abs(np.linalg.det(A)) < 1e-300:
            raise ValueError("discrete transition matrix is singular")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]


def jacobian_at(params: PlantParams, y0: np.ndarray) -> ContinuousModel:
    """Analytic Jacobian of the plant mass balance at levels ``y0``.

    Valid only under the strict ordering h1 > h3 > h2 (rejected otherwise).
    All three levels are measured, so C is the identity.
    """
    y0 = np.asarray(y0, dtype=float)
    _check_ordering(y0)
    h1, h2, h3 = y0[0], y0[1], y0[2]
    a = params.tank_area
    coeff = params.pipe_area * np.sqrt(2.0 * params.gravity) / (2.0 * a)
    a13 = params.mu13 * coeff / np.sqrt(h1 - h3)
    a32 = params.mu32 * coeff / np.sqrt(h3 - h2)
    a20 = params.mu20 * coeff / np.sqrt(h2)
    F = np.array(
        [
            [-a13, 0.0, a13],
            [0.0, -(a32 + a20), a32],
            [a13, a32, -(a13 + a32)],
        ]
    )
    # Inter-tank flow moves mass between tanks without creating it: the
    # tank-1/tank-3 coupling terms must cancel column-wise.
    assert F[0, 0] + F[2, 0] == 0.0
    assert F[0, 2] + (-a13) == 0.0
    B = np.array([[1.0 / a, 0.0], [0.0, 1.0 / a], [0.0, 0.0]])
    return ContinuousModel(F=F, B=B, C=np.eye(3))


def discretize(cm: ContinuousModel, t_s: float) -> DiscreteModel:
    """Exact zero-order-hold discretization via the augmented matrix exponential.

    exp([[F, B], [0, 0]] * t_s) = [[A, B_d], [0, I]], which is exact for a
    linear plant with inputs held constant over each period.
    """
    if not t_s > 0.0:
        raise ValueError(f"t_s must be > 0, got {t_s}")
    n, m = cm.n_states, cm.n_inputs
    M = np.zeros((n + m, n + m))
    M[:n, :n] = cm.F
    M[:n, n:] = cm.B
    E = expm(M * t_s)
    return DiscreteModel(A=E[:n, :n], B=E[:n, n:], C=cm.C.copy(), t_s=t_s)


def to_deviation(
    Y: np.ndarray, U: np.ndarray, op: OperatingPoint
) -> tuple[np.ndarray, np.ndarray]:
    """Absolute levels/inputs to deviation variables (y, u) = (Y - y0, U - u0)."""
    return np.asarray(Y, dtype=float) - op.y0, np.asarray(U, dtype=float) - op.u0


def from_deviation(
    y: np.ndarray, u: np.ndarray, op: OperatingPoint
) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`to_deviation`; round-trips exactly."""
    return np.asarray(y, dtype=float) + op.y0, np.asarray(u, dtype=float) + op.u0
