"""Integral-action tracking control: integrator augmentation and pole placement.

The discrete model is augmented with integrators on the first two outputs
(the pump-fed tanks), giving the composite state x_e = [x; z].  A constant
state feedback u = -K x_e places the closed-loop eigenvalues; the integrator
states guarantee zero steady-state error for constant references.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.signal import place_poles as _robust_place

from .errors import NumericalError
from .linmodel import DiscreteModel

#: Tolerance for the achieved closed-loop spectrum to count as matching the
#: requested one (multiset comparison over the complex plane).
PLACEMENT_TOL = 1e-8


@dataclass(frozen=True)
class AugmentedModel:
    """Discrete model with tracking integrators appended.

    A  = [[A_d, 0], [-t_s C1, I]],  B = [[B_d], [0]],  Br = [[0], [t_s I]]
    where C1 selects the two controlled outputs.
    """

    A: np.ndarray  # (n+p, n+p)
    B: np.ndarray  # (n+p, m)
    Br: np.ndarray  # (n+p, p), reference feed-in
    C: np.ndarray  # (q, n+p)
    t_s: float
    n_states: int  # plant states n (integrators follow)

    @property
    def n_integrators(self) -> int:
        return self.A.shape[0] - self.n_states


@dataclass(frozen=True)
class TrackingGain:
    """State-feedback gain u = -(K1 x + K2 z), partitioned as K = [K1 K2]."""

    K: np.ndarray
    n_states: int

    def __post_init__(self) -> None:
        K = np.asarray(self.K, dtype=float)
        if K.ndim != 2 or K.shape[1] <= self.n_states:
            raise ValueError("gain must be m x (n_states + n_integrators)")
        object.__setattr__(self, "K", K)

    @property
    def K1(self) -> np.ndarray:
        return self.K[:, : self.n_states]

    @property
    def K2(self) -> np.ndarray:
        return self.K[:, self.n_states:]


def controllability_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def augment(dm: DiscreteModel) -> AugmentedModel:
    """Append integrators for outputs 1 and 2 to a discrete model.

    Fails if the augmented pair is uncontrollable, since pole placement
    would then be impossible.
    """
    n, m = dm.n_states, dm.n_inputs
    C1 = dm.C[:2]
    p = C1.shape[0]
    A = np.zeros((n + p, n + p))
    A[:n, :n] = dm.A
    A[n:, :n] = -dm.t_s * C1
    A[n:, n:] = np.eye(p)
    B = np.vstack([dm.B, np.zeros((p, m))])
    Br = np.vstack([np.zeros((n, p)), dm.t_s * np.eye(p)])
    C = np.hstack([dm.C, np.zeros((dm.C.shape[0], p))])
    rank = np.linalg.matrix_rank(controllability_matrix(A, B))
    if rank < n + p:
        raise NumericalError(
            f"augmented pair is uncontrollable (rank {rank} < {n + p}); cannot place poles"
        )
    return AugmentedModel(A=A, B=B, Br=Br, C=C, t_s=dm.t_s, n_states=n)


def integrator_step(z: np.ndarray, y_r: np.ndarray, y1: np.ndarray, t_s: float) -> np.ndarray:
    """One integrator update z <- z + t_s (y_r - y1), componentwise."""
    return np.asarray(z, dtype=float) + t_s * (np.asarray(y_r, dtype=float) - np.asarray(y1, dtype=float))


def control(gain: TrackingGain, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Feedback law u = -(K1 x + K2 z) in deviation variables."""
    return -(gain.K1 @ np.asarray(x, dtype=float) + gain.K2 @ np.asarray(z, dtype=float))


def spectrum_gap(achieved, requested) -> float:
    """Largest pairing distance between two eigenvalue multisets.

    Uses an optimal assignment so conjugate pairs and near-ties cannot be
    mismatched by sorting artifacts.
    """
    a = np.atleast_1d(np.asarray(achieved, dtype=complex))
    r = np.atleast_1d(np.asarray(requested, dtype=complex))
    if a.shape != r.shape:
        raise ValueError("eigenvalue multisets must have equal size")
    cost = np.abs(a[:, None] - r[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def _conjugate_paired(lambdas: np.ndarray, tol: float = 1e-12) -> bool:
    left = sorted(lambdas, key=lambda v: (v.real, v.imag))
    right = sorted(np.conj(lambdas), key=lambda v: (v.real, v.imag))
    return all(abs(a - b) <= tol * max(1.0, abs(a)) for a, b in zip(left, right))


def place(A: np.ndarray, B: np.ndarray, lambdas) -> np.ndarray:
    """Gain K such that eig(A - B K) equals ``lambdas`` within PLACEMENT_TOL.

    Robust (Tits-Yang) assignment: among the non-unique MIMO solutions it
    picks well-conditioned eigenvectors, which keeps the gain entries at a
    physically usable scale.  Deterministic for fixed inputs.  Eigenvalues
    repeated more often than rank(B) cannot be assigned; that and any failure
    of the achieved spectrum to match raise NumericalError.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=complex))
    n = A.shape[0]
    if lambdas.shape != (n,):
        raise ValueError(f"need exactly {n} eigenvalues, got {lambdas.shape}")
    if not _conjugate_paired(lambdas):
        raise ValueError("requested eigenvalues must be closed under conjugation")
    if np.any(np.abs(lambdas) >= 1.0):
        warnings.warn("requested eigenvalues outside the unit disk: discrete loop will be unstable")
    if np.all(np.abs(lambdas.imag) < 1e-14):
        lambdas = lambdas.real.astype(complex)
    try:
        K = _robust_place(A, B, lambdas, method="YT").gain_matrix
    except ValueError as exc:
        raise NumericalError(f"pole placement failed: {exc}") from exc
    gap = spectrum_gap(np.linalg.eigvals(A - B @ K), lambdas)
    if gap > PLACEMENT_TOL:
        raise NumericalError(f"placed spectrum off by {gap:.3e} (> {PLACEMENT_TOL})")
    return K


def place_poles(am: AugmentedModel, lambdas) -> TrackingGain:
    """Design the tracking gain for an augmented model; see :func:`place`."""
    return TrackingGain(K=place(am.A, am.B, lambdas), n_states=am.n_states)
