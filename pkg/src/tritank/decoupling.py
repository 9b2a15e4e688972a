"""Exact input-output linearization with decoupling for the three-tank plant.

The machinery is generic over control-affine systems dx/dt = drift(x) + sum_i
xi_i u_i with scalar outputs: Lie derivatives, relative degrees probed
numerically, and the decoupling matrix built from mixed Lie derivatives.  The
three-tank instance (outputs h1 and h2, constant input columns e1/A and e2/A)
is the intended, heavily tested case: there the decoupling matrix is the
constant (1/A) I and the feedback u = Lambda^{-1} (zeta - Lambda0(x)) renders
each pump-fed tank an independent integrator driven by zeta.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError
from .plant import PlantParams, derivatives

#: Lie derivatives smaller than this count as zero when probing relative degrees.
ZERO_TOL = 1e-12

#: Step for numeric gradients of composed Lie chains (first-order chains use
#: the outputs' analytic gradients and never differentiate numerically).
GRAD_STEP = 1e-6


class ScalarField:
    """Scalar function of the state with a gradient.

    ``grad`` may be omitted, in which case a central difference is used;
    supply the analytic gradient whenever it is available.
    """

    def __init__(self, fn: Callable[[np.ndarray], float], grad=None, step: float = GRAD_STEP):
        self._fn = fn
        self._grad = grad
        self._step = step

    def __call__(self, x: np.ndarray) -> float:
        return float(self._fn(np.asarray(x, dtype=float)))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._grad is not None:
            return np.asarray(self._grad(x), dtype=float)
        g = np.empty_like(x)
        for j in range(x.size):
            e = np.zeros_like(x)
            e[j] = self._step
            g[j] = (self._fn(x + e) - self._fn(x - e)) / (2.0 * self._step)
        return g


def linear_output(row: np.ndarray) -> ScalarField:
    """Output H(x) = row . x with its constant analytic gradient."""
    row = np.asarray(row, dtype=float)
    return ScalarField(lambda x: float(row @ x), grad=lambda x: row.copy())


def lie_derivative(f: Callable[[np.ndarray], np.ndarray], H: ScalarField, x: np.ndarray) -> float:
    """Directional derivative of H along the vector field f at x."""
    x = np.asarray(x, dtype=float)
    return float(np.dot(np.asarray(f(x), dtype=float), H.gradient(x)))


def lie_field(f: Callable[[np.ndarray], np.ndarray], H: ScalarField) -> ScalarField:
    """The scalar field x -> L_f H(x), differentiable again (numerically)."""
    return ScalarField(lambda x: lie_derivative(f, H, x))


def iterated_lie_field(f, H: ScalarField, order: int) -> ScalarField:
    """L_f^order H as a scalar field; order 0 is H itself."""
    out = H
    for _ in range(order):
        out = lie_field(f, out)
    return out


@dataclass(frozen=True)
class AffineSystem:
    """Control-affine system: dx/dt = drift(x) + input_fields @ u."""

    drift: Callable[[np.ndarray], np.ndarray]
    input_fields: np.ndarray  # (n, m), constant column vector fields
    outputs: tuple[ScalarField, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_fields", np.asarray(self.input_fields, dtype=float))
        object.__setattr__(self, "outputs", tuple(self.outputs))

    @property
    def n_states(self) -> int:
        return self.input_fields.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.input_fields.shape[1]

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    def input_field_fn(self, j: int) -> Callable[[np.ndarray], np.ndarray]:
        col = self.input_fields[:, j].copy()
        return lambda x: col


def three_tank_affine_system(params: PlantParams) -> AffineSystem:
    """The plant as a control-affine system with outputs h1 and h2."""
    xi = np.zeros((3, 2))
    xi[0, 0] = 1.0 / params.tank_area
    xi[1, 1] = 1.0 / params.tank_area
    zero_u = np.zeros(2)
    return AffineSystem(
        drift=lambda x: derivatives(x, zero_u, params),
        input_fields=xi,
        outputs=(linear_output([1.0, 0.0, 0.0]), linear_output([0.0, 1.0, 0.0])),
    )


def default_probe_points(x0: np.ndarray, scale: float = 0.02) -> np.ndarray:
    """The reference state plus eight deterministic perturbations of it.

    Axis-aligned bumps keep whatever level ordering x0 has; two mixed bumps
    cover interaction terms.
    """
    x0 = np.asarray(x0, dtype=float)
    probes = [x0]
    for j in range(x0.size):
        for sgn in (1.0, -1.0):
            p = x0.copy()
            p[j] += sgn * scale * 0.4
            probes.append(p)
    probes.append(x0 + scale * np.array([0.5, -0.25, 0.25])[: x0.size])
    probes.append(x0 + scale * np.array([-0.25, 0.5, -0.25])[: x0.size])
    return np.array(probes)


def relative_degree(sys: AffineSystem, i: int, probes: np.ndarray) -> int:
    """Smallest l with some L_xi_j L_drift^(l-1) H_i nonzero at a probe point.

    Probing replaces the "for some x" quantifier; the search is capped at the
    state dimension and raises if nothing qualifies.
    """
    H = sys.outputs[i]
    for order in range(1, sys.n_states + 1):
        chain = iterated_lie_field(sys.drift, H, order - 1)
        for x in np.atleast_2d(probes):
            for j in range(sys.n_inputs):
                if abs(lie_derivative(sys.input_field_fn(j), chain, x)) > ZERO_TOL:
                    return order
    raise NumericalError(
        f"relative degree of output {i} undefined: no input reaches it within {sys.n_states} differentiations"
    )


def decoupling_matrices(
    sys: AffineSystem,
    x: np.ndarray,
    degrees: Sequence[int] | None = None,
    probes: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Decoupling matrix Lambda(x) and drift vector Lambda0(x).

    Lambda[i, j] = L_xi_j L_drift^(deg_i - 1) H_i(x) and
    Lambda0[i] = L_drift^(deg_i) H_i(x).  Degrees are probed if not given.
    """
    x = np.asarray(x, dtype=float)
    if degrees is None:
        if probes is None:
            probes = default_probe_points(x)
        degrees = [relative_degree(sys, i, probes) for i in range(sys.n_outputs)]
    lam = np.zeros((sys.n_outputs, sys.n_inputs))
    lam0 = np.zeros(sys.n_outputs)
    for i, deg in enumerate(degrees):
        chain = iterated_lie_field(sys.drift, sys.outputs[i], deg - 1)
        for j in range(sys.n_inputs):
            lam[i, j] = lie_derivative(sys.input_field_fn(j), chain, x)
        lam0[i] = lie_derivative(sys.drift, chain, x)
    return lam, lam0


@dataclass(frozen=True)
class DecouplingLaw:
    """Frozen decoupling design: relative degrees, the (constant) decoupling
    matrix, the drift compensation Lambda0(x), and the outer proportional gains."""

    relative_degrees: tuple[int, ...]
    lam: np.ndarray  # (m, m), constant over the admissible region
    lam0: Callable[[np.ndarray], np.ndarray]
    outer_gains: np.ndarray  # (m,), 1/s
    lam_inv: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        lam = np.asarray(self.lam, dtype=float)
        gains = np.asarray(self.outer_gains, dtype=float)
        if np.any(gains <= 0.0):
            raise ValueError("outer gains must be strictly positive")
        if np.linalg.matrix_rank(lam) < lam.shape[0]:
            raise NumericalError("decoupling matrix is singular; channels cannot be separated")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "outer_gains", gains)
        object.__setattr__(self, "lam_inv", np.linalg.inv(lam))


def design_decoupling_law(
    sys: AffineSystem,
    outer_gains,
    probes: np.ndarray,
    constancy_tol: float = 1e-9,
) -> DecouplingLaw:
    """Probe relative degrees, verify Lambda is constant full-rank, and freeze the law.

    The constancy check is what licenses storing Lambda as a plain matrix;
    for plants with state-dependent Lambda this raises rather than silently
    averaging.
    """
    degrees = tuple(relative_degree(sys, i, probes) for i in range(sys.n_outputs))
    lams = []
    for x in np.atleast_2d(probes):
        lam, _ = decoupling_matrices(sys, x, degrees=degrees)
        if np.linalg.matrix_rank(lam) < sys.n_outputs:
            raise NumericalError(f"decoupling matrix rank-deficient at probe {x}")
        lams.append(lam)
    lam = lams[0]
    spread = max(float(np.max(np.abs(l - lam))) for l in lams)
    if spread > constancy_tol * max(1.0, float(np.max(np.abs(lam)))):
        raise NumericalError("decoupling matrix is state-dependent; constant-law design does not apply")

    # The drift compensation is evaluated at every integrator stage of a
    # closed-loop run, so keep its hot path lean: one drift evaluation plus
    # a gradient dot per output.
    chains = tuple(
        iterated_lie_field(sys.drift, sys.outputs[i], deg - 1) for i, deg in enumerate(degrees)
    )

    def lam0(x: np.ndarray) -> np.ndarray:
        d = np.asarray(sys.drift(x), dtype=float)
        return np.array([float(d @ chain.gradient(x)) for chain in chains])

    return DecouplingLaw(relative_degrees=degrees, lam=lam, lam0=lam0, outer_gains=outer_gains)


def linearizing_feedback(
    law: DecouplingLaw, x: np.ndarray, zeta: np.ndarray, q_max: float
) -> tuple[np.ndarray, np.ndarray]:
    """Pump command u = Lambda^{-1} (zeta - Lambda0(x)), clamped to [0, q_max].

    Returns (u, saturated) where ``saturated`` flags each pump that hit a
    limit; exact linearization only holds while no flag is set.
    """
    raw = law.lam_inv @ (np.asarray(zeta, dtype=float) - law.lam0(x))
    u = np.clip(raw, 0.0, q_max)
    return u, raw != u


def outer_loop(law: DecouplingLaw, y_r: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Proportional outer loop zeta_i = K_i (y_r_i - h_i).

    Closes each linearized integrator channel into a stable first-order lag
    with pole -K_i.
    """
    return law.outer_gains * (np.asarray(y_r, dtype=float) - np.asarray(h, dtype=float))
