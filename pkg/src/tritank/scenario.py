"""Scenario runner: reference programs, noise, closed-loop wiring and records.

A scenario is described by a JSON-compatible :class:`ScenarioConfig` and runs
one of four modes against the true nonlinear plant:

* ``open-loop``             constant or stepped pump program, no feedback
* ``linear-tracking``       deviation-variable integral-action state feedback
* ``nonlinear-decoupling``  exact linearization plus proportional outer loops
* ``akf-estimation``        pump program drive with the adaptive filter estimating

Every run is deterministic given (config, seed).  Records are emitted once
per control period and serialize to CSV with a fixed column set; values use
shortest round-trip float formatting, so re-reading the CSV reproduces the
numbers bit-exactly.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import akf as akf_mod
from . import plant as plant_mod
from .decoupling import (
    DecouplingLaw,
    default_probe_points,
    design_decoupling_law,
    linearizing_feedback,
    outer_loop,
    three_tank_affine_system,
)
from .linmodel import OperatingPoint, discretize, jacobian_at
from .plant import PlantParams
from .tracking import TrackingGain, augment, control, integrator_step, place_poles

MODES = ("open-loop", "linear-tracking", "nonlinear-decoupling", "akf-estimation")

#: Default operating point of the benchmark rig: pump flows in m^3/s and
#: levels in m.  Note the stated input is not an exact equilibrium for tank 2
#: (the balancing flow would be about 0.318e-4, not 0.375e-4); the integral
#: and outer control loops absorb the offset.
DEFAULT_U0 = (0.35e-4, 0.375e-4)
DEFAULT_Y0 = (0.40, 0.20, 0.30)

DEFAULT_LAMBDAS = (0.92, 0.97, 0.90, 0.95, 0.94)
DEFAULT_OUTER_GAINS = (0.02, 0.02)
DEFAULT_NOISE_SIGMA = (0.005, 0.005, 0.005)

CSV_COLUMNS = (
    "t,h1,h2,h3,y1,y2,y3,yr1,yr2,u1,u2,zeta1,zeta2,"
    "xhat1,xhat2,xhat3,z1,z2,sat1,sat2"
).split(",")


@dataclass(frozen=True)
class ReferenceProgram:
    """Piecewise-constant step program, one list of (t_start, level) per output.

    Lookups are right-continuous; times before the first segment return the
    first level.
    """

    outputs: tuple[tuple[tuple[float, float], ...], ...]

    def __post_init__(self) -> None:
        cleaned = []
        for segments in self.outputs:
            segs = tuple((float(t), float(level)) for t, level in segments)
            if not segs:
                raise ValueError("each output needs at least one (t_start, level) segment")
            times = [t for t, _ in segs]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError("segment start times must be strictly increasing")
            cleaned.append(segs)
        object.__setattr__(self, "outputs", tuple(cleaned))

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    def level_at(self, output: int, t: float) -> float:
        level = self.outputs[output][0][1]
        for t_start, value in self.outputs[output]:
            if t >= t_start:
                level = value
            else:
                break
        return level

    def levels_at(self, t: float) -> np.ndarray:
        return np.array([self.level_at(i, t) for i in range(self.n_outputs)])

    def step_times(self) -> list[tuple[int, float]]:
        """(output, time) of every level change after the initial segment."""
        events = []
        for i, segs in enumerate(self.outputs):
            events.extend((i, t) for t, _ in segs[1:])
        return sorted(events, key=lambda e: e[1])


def generate_reference(prog: ReferenceProgram, t: float) -> np.ndarray:
    """Reference levels at time t (right-continuous lookup)."""
    return prog.levels_at(t)


def default_tracking_program() -> ReferenceProgram:
    """Step program for the tracking demos: +-0.05 m moves around the
    default operating levels, events spaced 500 s apart."""
    return ReferenceProgram(
        outputs=(
            ((0.0, 0.40), (500.0, 0.45), (1500.0, 0.40)),
            ((0.0, 0.20), (1000.0, 0.25), (2000.0, 0.20)),
        )
    )


def default_decoupling_program() -> ReferenceProgram:
    """Step program for the decoupling demos; long constant tail so the
    unactuated middle tank settles completely."""
    return ReferenceProgram(
        outputs=(
            ((0.0, 0.40), (500.0, 0.45)),
            ((0.0, 0.20), (1500.0, 0.25)),
        )
    )


@dataclass(frozen=True)
class InputProgram:
    """Piecewise-constant pump program for open-loop style runs."""

    pumps: tuple[tuple[tuple[float, float], ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "pumps",
            tuple(tuple((float(t), float(q)) for t, q in pump) for pump in self.pumps),
        )

    def flows_at(self, t: float) -> np.ndarray:
        out = []
        for segments in self.pumps:
            value = segments[0][1]
            for t_start, q in segments:
                if t >= t_start:
                    value = q
            out.append(value)
        return np.array(out)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a scenario run depends on; mirrors the JSON schema."""

    mode: str
    duration: float = 1000.0
    t_s: float = 1.0
    seed: int = 0
    plant: PlantParams = field(default_factory=PlantParams)
    operating_point: OperatingPoint = field(
        default_factory=lambda: OperatingPoint(np.array(DEFAULT_U0), np.array(DEFAULT_Y0))
    )
    initial_levels: tuple[float, float, float] = DEFAULT_Y0
    reference: ReferenceProgram | None = None
    input_program: InputProgram | None = None
    lambdas: tuple[float, ...] = DEFAULT_LAMBDAS
    gain_matrix: tuple | None = None  # overrides lambdas when given (2 x 5 rows)
    anti_windup: bool = True
    outer_gains: tuple[float, float] = DEFAULT_OUTER_GAINS
    noise_sigma: tuple[float, float, float] = DEFAULT_NOISE_SIGMA
    process_noise_sigma: float = 0.0
    akf: akf_mod.AkfConfig = field(default_factory=akf_mod.AkfConfig)
    akf_x0: tuple[float, float, float] = (0.9, 0.55, 0.5)  # absolute levels

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.duration > 0.0:
            raise ValueError("duration must be > 0")
        if not self.t_s > 0.0:
            raise ValueError("t_s must be > 0")
        if any(s < 0.0 for s in self.noise_sigma):
            raise ValueError("noise_sigma components must be >= 0")
        if self.process_noise_sigma < 0.0:
            raise ValueError("process_noise_sigma must be >= 0")


@dataclass(frozen=True)
class SimRecord:
    """One control period of a run; optional fields are None when the mode
    does not produce them.

    ``t`` is the sample instant, ``h``/``y`` the true and measured levels at
    that instant, and ``u`` the command applied over [t, t + t_s).
    """

    t: float
    h: np.ndarray
    y: np.ndarray
    y_r: np.ndarray | None
    u: np.ndarray
    zeta: np.ndarray | None
    xhat: np.ndarray | None
    z: np.ndarray | None
    sat: np.ndarray


def add_measurement_noise(y: np.ndarray, sigma: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """y plus independent zero-mean Gaussian noise with per-component std sigma.

    Uses the generator passed in, so call order under a fixed seed fixes the
    samples.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0.0):
        raise ValueError("sigma must be >= 0")
    return np.asarray(y, dtype=float) + sigma * rng.standard_normal(sigma.shape)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    return repr(float(value))


def record_to_row(rec: SimRecord) -> list[str]:
    cells = [_fmt(rec.t)]
    cells += [_fmt(v) for v in rec.h]
    cells += [_fmt(v) for v in rec.y]
    cells += [_fmt(v) for v in (rec.y_r if rec.y_r is not None else (None, None))]
    cells += [_fmt(v) for v in rec.u]
    cells += [_fmt(v) for v in (rec.zeta if rec.zeta is not None else (None, None))]
    cells += [_fmt(v) for v in (rec.xhat if rec.xhat is not None else (None, None, None))]
    cells += [_fmt(v) for v in (rec.z if rec.z is not None else (None, None))]
    cells += [_fmt(v) for v in rec.sat]
    return cells


def records_to_csv(records: Sequence[SimRecord]) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for rec in records:
        buf.write(",".join(record_to_row(rec)) + "\n")
    return buf.getvalue()


def write_csv(records: Sequence[SimRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(records_to_csv(records))


def read_csv(path) -> dict[str, np.ndarray]:
    """Columns of a run CSV as float arrays (NaN for empty cells)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    cols = {name: np.empty(len(rows)) for name in CSV_COLUMNS}
    for k, row in enumerate(rows):
        if len(row) != len(CSV_COLUMNS):
            raise ValueError(f"row {k + 2} has {len(row)} cells, expected {len(CSV_COLUMNS)}")
        for name, cell in zip(CSV_COLUMNS, row):
            cols[name][k] = float(cell) if cell else np.nan
    return cols


def _clamp_input(u: np.ndarray, q_max: float) -> tuple[np.ndarray, np.ndarray]:
    clamped = np.clip(u, 0.0, q_max)
    return clamped, clamped != u


def _closed_loop_rk4(h, t, dt, params, control_fn, sat_out):
    """One RK4 step of dh/dt = f(h, u(h, t)): the control law is evaluated at
    every stage, which realizes the continuous-time decoupling law."""

    def f(hh, tt):
        u, sat = control_fn(hh, tt)
        np.logical_or(sat_out, sat, out=sat_out)
        return plant_mod.derivatives(hh, u, params)

    k1 = f(h, t)
    k2 = f(h + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(h + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(h + dt * k3, t + dt)
    return np.clip(h + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), 0.0, params.h_max)


def build_tracking_gain(cfg: ScenarioConfig) -> TrackingGain:
    """Gain from the config: an explicit matrix if given, else pole placement."""
    if cfg.gain_matrix is not None:
        K = np.asarray(cfg.gain_matrix, dtype=float)
        return TrackingGain(K=K, n_states=3)
    dm = discretize(jacobian_at(cfg.plant, cfg.operating_point.y0), cfg.t_s)
    return place_poles(augment(dm), np.asarray(cfg.lambdas))


def build_decoupling_law(cfg: ScenarioConfig) -> DecouplingLaw:
    sys = three_tank_affine_system(cfg.plant)
    probes = default_probe_points(cfg.operating_point.y0)
    return design_decoupling_law(sys, np.asarray(cfg.outer_gains), probes)


def run_scenario(cfg: ScenarioConfig):
    """Run one scenario; returns (records, metrics).

    Construction failures (uncontrollable model, bad eigenvalue request,
    singular decoupling matrix) propagate to the caller.
    """
    from .metrics import compute_metrics  # local import to avoid a cycle

    rng = np.random.default_rng(cfg.seed)
    params = cfg.plant
    op = cfg.operating_point
    t_s = cfg.t_s
    n_steps = int(round(cfg.duration / t_s))
    sigma = np.asarray(cfg.noise_sigma, dtype=float)
    h = np.asarray(cfg.initial_levels, dtype=float)

    reference = cfg.reference
    if reference is None and cfg.mode in ("linear-tracking", "nonlinear-decoupling"):
        reference = (
            default_tracking_program()
            if cfg.mode == "linear-tracking"
            else default_decoupling_program()
        )
    input_program = cfg.input_program
    if input_program is None:
        input_program = InputProgram(pumps=(((0.0, op.u0[0]),), ((0.0, op.u0[1]),)))

    gain = z = None
    law = None
    filt = dm = None
    u_prev_dev = np.zeros(2)
    if cfg.mode == "linear-tracking":
        gain = build_tracking_gain(cfg)
        z = np.zeros(2)
    elif cfg.mode == "nonlinear-decoupling":
        law = build_decoupling_law(cfg)
    elif cfg.mode == "akf-estimation":
        dm = discretize(jacobian_at(params, op.y0), t_s)
        filt = akf_mod.initial_state(cfg.akf, np.asarray(cfg.akf_x0) - op.y0)

    records: list[SimRecord] = []
    for k in range(n_steps):
        t = k * t_s
        h_sample = h
        y_meas = add_measurement_noise(h_sample, sigma, rng)
        y_r = generate_reference(reference, t) if reference is not None else None
        zeta = xhat = z_rec = None

        if cfg.mode == "open-loop":
            u, sat = _clamp_input(input_program.flows_at(t), params.q_max)
            h = plant_mod.step(h, u, t_s, params)

        elif cfg.mode == "linear-tracking":
            x_dev = y_meas - op.y0
            u_dev = control(gain, x_dev, z)
            u_raw = u_dev + op.u0
            u, sat = _clamp_input(u_raw, params.q_max)
            z_rec = z.copy()
            z_new = integrator_step(z, y_r - op.y0[:2], y_meas[:2] - op.y0[:2], t_s)
            if cfg.anti_windup:
                # Conditional integration: freeze a channel only while the
                # update would push its (already clamped) pump further out.
                du = -(gain.K2 @ (z_new - z))
                deeper = sat & (((u_raw < 0.0) & (du < 0.0)) | ((u_raw > params.q_max) & (du > 0.0)))
                z = np.where(deeper, z, z_new)
            else:
                z = z_new
            h = plant_mod.step(h, u, t_s, params)

        elif cfg.mode == "nonlinear-decoupling":
            if np.all(sigma == 0.0):
                # Noise-free runs realize the continuous-time law: the
                # feedback is re-evaluated at every integrator stage, which
                # keeps the channels exactly decoupled.  The reference is
                # held over each substep (sampled at its left edge) so a
                # step never lands inside an integrator stage.
                sat = np.zeros(2, dtype=bool)
                zeta = outer_loop(law, y_r, h_sample[:2])
                u, _ = linearizing_feedback(law, h_sample, zeta, params.q_max)
                # The decoupled closed loop is slow (time constants 1/K_i),
                # so one-second RK4 substeps already integrate it to well
                # below the exactness tolerances.
                n_sub = max(1, int(round(t_s / 1.0)))
                sub = t_s / n_sub
                for j in range(n_sub):
                    yr_sub = generate_reference(reference, t + j * sub)

                    def control_fn(hh, tt, yr_sub=yr_sub):
                        zz = outer_loop(law, yr_sub, hh[:2])
                        return linearizing_feedback(law, hh, zz, params.q_max)

                    h = _closed_loop_rk4(h, t + j * sub, sub, params, control_fn, sat)
            else:
                # Noisy runs fall back to the classic digital loop: measure,
                # hold the command for one period.
                zeta = outer_loop(law, y_r, y_meas[:2])
                u, sat = linearizing_feedback(law, y_meas, zeta, params.q_max)
                h = plant_mod.step(h, u, t_s, params)

        else:  # akf-estimation
            u, sat = _clamp_input(input_program.flows_at(t), params.q_max)
            if k > 0:
                filt = akf_mod.akf_step(filt, dm, u_prev_dev, y_meas - op.y0, cfg.akf)
            xhat = filt.xhat + op.y0
            u_prev_dev = u - op.u0
            h = plant_mod.step(h, u, t_s, params)
            if cfg.process_noise_sigma > 0.0:
                h = np.clip(
                    h + cfg.process_noise_sigma * rng.standard_normal(3), 0.0, params.h_max
                )

        records.append(
            SimRecord(
                t=t,
                h=h_sample,
                y=y_meas,
                y_r=y_r,
                u=u,
                zeta=zeta,
                xhat=xhat,
                z=z_rec,
                sat=np.asarray(sat, dtype=bool),
            )
        )

    return records, compute_metrics(records)


# --- JSON config ---------------------------------------------------------

def _program_from_json(data, cls):
    if data is None:
        return None
    keys = sorted(data.keys())
    return cls(tuple(tuple(tuple(seg) for seg in data[key]) for key in keys))


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from parsed JSON; unknown keys are rejected."""
    data = dict(data)
    known = {
        "mode", "duration", "t_s", "seed", "plant", "operating_point",
        "initial_levels", "reference", "input_program", "lambdas",
        "gain_matrix", "anti_windup", "outer_gains", "noise_sigma",
        "process_noise_sigma", "akf", "akf_x0",
    }
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "mode" not in data:
        raise ValueError("config must give a mode")

    kwargs: dict = {"mode": data["mode"]}
    for key in ("duration", "t_s", "process_noise_sigma"):
        if key in data:
            kwargs[key] = float(data[key])
    if "seed" in data:
        kwargs["seed"] = int(data["seed"])
    if "plant" in data:
        kwargs["plant"] = PlantParams(**{k: float(v) for k, v in data["plant"].items()})
    if "operating_point" in data:
        opd = data["operating_point"]
        kwargs["operating_point"] = OperatingPoint(
            np.asarray(opd["u0"], dtype=float), np.asarray(opd["y0"], dtype=float)
        )
    for key in ("initial_levels", "lambdas", "outer_gains", "noise_sigma", "akf_x0"):
        if key in data:
            kwargs[key] = tuple(float(v) for v in data[key])
    if data.get("reference") is not None:
        kwargs["reference"] = _program_from_json(data["reference"], ReferenceProgram)
    if data.get("input_program") is not None:
        kwargs["input_program"] = _program_from_json(data["input_program"], InputProgram)
    if data.get("gain_matrix") is not None:
        kwargs["gain_matrix"] = tuple(tuple(float(v) for v in row) for row in data["gain_matrix"])
    if "anti_windup" in data:
        kwargs["anti_windup"] = bool(data["anti_windup"])
    if "akf" in data:
        akfd = dict(data["akf"])
        for key in ("q0", "r", "p0"):
            if key in akfd and isinstance(akfd[key], list):
                akfd[key] = np.asarray(akfd[key], dtype=float)
        if "q_bounds" in akfd:
            akfd["q_bounds"] = tuple(float(v) for v in akfd["q_bounds"])
        if "r_bounds" in akfd:
            akfd["r_bounds"] = tuple(float(v) for v in akfd["r_bounds"])
        kwargs["akf"] = akf_mod.AkfConfig(**akfd)
    return ScenarioConfig(**kwargs)


def load_scenario(path) -> ScenarioConfig:
    """Read a scenario config from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"invalid JSON in {path}: {exc}") from exc
    return scenario_from_dict(data)
