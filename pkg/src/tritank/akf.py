"""Kalman filtering on the sampled linear model with adaptive process noise.

The filter is the standard predict/update recursion; on top of it the
process-noise covariance is re-estimated online from a sliding window of
post-fit residuals and state increments, then eigenvalue-clamped into a
configured band so the Riccati recursion stays bounded.

Every operation is a pure state transition: it takes an ``AkfState`` and
returns a new one, so filters can run in parallel on disjoint states.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericalError
from .linmodel import DiscreteModel


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _as_cov(value, n: int, name: str) -> np.ndarray:
    """Scalar -> scalar * I, else a full (n, n) symmetric matrix."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = float(arr) * np.eye(n)
    if arr.shape != (n, n):
        raise ValueError(f"{name} must be a scalar or an ({n}, {n}) matrix")
    if np.max(np.abs(arr - arr.T)) > 1e-12 * max(1.0, float(np.max(np.abs(arr)))):
        raise ValueError(f"{name} must be symmetric")
    return _sym(arr)


@dataclass(frozen=True)
class AkfConfig:
    """Filter initialization and adaptation settings.

    ``adaptation`` selects the process-noise estimator: "increment" builds it
    from windowed state increments plus the covariance bookkeeping term,
    "gain-residual" from K C_v K^T with the windowed residual covariance.
    The r_bounds are validated for completeness but never applied: the
    measurement covariance is known and fixed here.
    """

    window: int = 30
    q0: np.ndarray | float = 1e-12
    r: np.ndarray | float = 2.5e-5
    p0: np.ndarray | float = 10.0
    q_bounds: tuple[float, float] = (1e-14, 1e-2)
    r_bounds: tuple[float, float] = (1e-12, 1e12)
    adaptation: str = "increment"
    n_states: int = 3

    def __post_init__(self) -> None:
        if self.window < 2:
            raise ValueError("window must hold at least 2 samples")
        if self.adaptation not in ("increment", "gain-residual"):
            raise ValueError(f"unknown adaptation mode {self.adaptation!r}")
        q_lo, q_hi = self.q_bounds
        if not (0.0 < q_lo <= q_hi < np.inf):
            raise ValueError("q_bounds must satisfy 0 < q_lo <= q_hi < inf")
        r_lo, r_hi = self.r_bounds
        if not (0.0 < r_lo <= r_hi):
            raise ValueError("r_bounds must satisfy 0 < r_lo <= r_hi")
        n = self.n_states
        object.__setattr__(self, "q0", _as_cov(self.q0, n, "q0"))
        object.__setattr__(self, "r", _as_cov(self.r, n, "r"))
        p0 = _as_cov(self.p0, n, "p0")
        if np.min(np.linalg.eigvalsh(p0)) <= 0.0:
            raise ValueError("p0 must be positive definite")
        object.__setattr__(self, "p0", p0)


@dataclass(frozen=True)
class AkfState:
    """Estimate, covariances and the adaptation window buffers.

    ``P_prev`` is the posterior covariance of the previous step, kept because
    the process-noise estimator needs P_k - F P_{k-1} F^T.
    """

    xhat: np.ndarray
    P: np.ndarray
    qhat: np.ndarray
    window: int
    residual_window: tuple[np.ndarray, ...] = ()
    dx_window: tuple[np.ndarray, ...] = ()
    K_last: np.ndarray | None = None
    P_prev: np.ndarray | None = None


def initial_state(cfg: AkfConfig, xhat0) -> AkfState:
    """Fresh filter state from the configuration and an initial estimate."""
    xhat0 = np.asarray(xhat0, dtype=float)
    if xhat0.shape != (cfg.n_states,):
        raise ValueError(f"initial estimate must have shape ({cfg.n_states},)")
    return AkfState(xhat=xhat0, P=cfg.p0.copy(), qhat=cfg.q0.copy(), window=cfg.window)


def transition_jacobian(dm: DiscreteModel, xhat=None, u=None) -> np.ndarray:
    """State Jacobian of the transition map; the model is affine, so this is
    just A regardless of the point (the signature keeps the generic form)."""
    return dm.A.copy()


def predict(st: AkfState, dm: DiscreteModel, u: np.ndarray) -> AkfState:
    """Extrapolate estimate and covariance one period ahead."""
    F = transition_jacobian(dm, st.xhat, u)
    x_pred = dm.A @ st.xhat + dm.B @ np.asarray(u, dtype=float)
    p_pred = _sym(F @ st.P @ F.T) + st.qhat
    return replace(st, xhat=x_pred, P=p_pred, P_prev=st.P)


def update(st: AkfState, y: np.ndarray, H: np.ndarray, R: np.ndarray) -> AkfState:
    """Measurement update; appends the post-fit residual and the state
    increment to the adaptation windows.

    The residual stored is y - H xhat with the *updated* estimate, not the
    innovation y - H xhat^-.
    """
    y = np.asarray(y, dtype=float)
    H = np.asarray(H, dtype=float)
    R = np.asarray(R, dtype=float)
    S = H @ st.P @ H.T + R
    if not np.all(np.isfinite(S)) or abs(np.linalg.det(S)) < 1e-300:
        raise NumericalError("singular innovation covariance; check R and P")
    K = st.P @ H.T @ np.linalg.inv(S)
    x_new = st.xhat + K @ (y - H @ st.xhat)
    p_new = _sym((np.eye(st.P.shape[0]) - K @ H) @ st.P)
    v = y - H @ x_new
    dx = x_new - st.xhat
    return replace(
        st,
        xhat=x_new,
        P=p_new,
        residual_window=(st.residual_window + (v,))[-st.window:],
        dx_window=(st.dx_window + (dx,))[-st.window:],
        K_last=K,
    )


def residual_covariance(st: AkfState) -> np.ndarray:
    """Windowed second moment of the post-fit residuals, (1/N) sum v v^T."""
    if not st.residual_window:
        raise ValueError("residual window is empty")
    vs = np.asarray(st.residual_window)
    return _sym(vs.T @ vs / len(st.residual_window))


def _clamp_eigenvalues(M: np.ndarray, lo: float, hi: float) -> np.ndarray:
    w, V = np.linalg.eigh(_sym(M))
    return _sym(V @ np.diag(np.clip(w, lo, hi)) @ V.T)


def adapt_q(st: AkfState, cfg: AkfConfig, F: np.ndarray) -> AkfState:
    """Re-estimate the process-noise covariance from the full windows.

    "increment" mode: mean of dx dx^T plus P_k - F P_{k-1} F^T; the raw
    candidate can be indefinite, so it is symmetrized and its eigenvalues
    clamped into the configured band, which also keeps the filter bounded.
    "gain-residual" mode: K C_v K^T, clamped the same way.
    """
    if len(st.dx_window) < st.window or len(st.residual_window) < st.window:
        raise ValueError("adaptation windows are not full yet")
    F = np.asarray(F, dtype=float)
    if cfg.adaptation == "gain-residual":
        K = st.K_last if st.K_last is not None else np.zeros_like(st.P)
        candidate = K @ residual_covariance(st) @ K.T
    else:
        dxs = np.asarray(st.dx_window)
        q_alpha = dxs.T @ dxs / len(st.dx_window)
        p_prev = st.P_prev if st.P_prev is not None else st.P
        candidate = q_alpha + st.P - F @ p_prev @ F.T
    q_new = _clamp_eigenvalues(candidate, cfg.q_bounds[0], cfg.q_bounds[1])
    return replace(st, qhat=q_new)


def akf_step(
    st: AkfState, dm: DiscreteModel, u: np.ndarray, y: np.ndarray, cfg: AkfConfig
) -> AkfState:
    """One full adaptive cycle: predict, update, then (windows permitting)
    re-estimate the process noise."""
    st = predict(st, dm, u)
    st = update(st, y, dm.C, cfg.r)
    if len(st.dx_window) >= st.window and len(st.residual_window) >= st.window:
        st = adapt_q(st, cfg, transition_jacobian(dm))
    return st
