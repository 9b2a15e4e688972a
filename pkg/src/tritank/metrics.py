"""Run metrics: tracking error, settling times, estimation error.

Metrics can be computed from in-memory records or recomputed from an emitted
CSV; the two agree exactly because the CSV stores round-trip float text.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .scenario import SimRecord

#: Default settling band (m) and estimation burn-in (s).
SETTLE_BAND = 1e-3
DEFAULT_BURN_IN = 200.0


@dataclass(frozen=True)
class MetricsReport:
    """Per-output tracking RMSE, settling times per reference step, per-level
    estimation RMSE (after burn-in) and saturation counts.

    ``settling_times`` holds one entry per reference step event as
    [output_index, event_time, settling_seconds]; settling_seconds is NaN if
    the output never stays inside the band before the next event.
    """

    tracking_rmse: tuple[float, ...] | None
    settling_times: tuple[tuple[float, float, float], ...] | None
    estimation_rmse: tuple[float, ...] | None
    estimation_burn_in: float
    saturation_steps: int
    n_records: int

    def to_dict(self) -> dict:
        return asdict(self)


def _rmse(err: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(err))))


def _settling(
    t: np.ndarray, err: np.ndarray, events: list[tuple[int, float]], band: float
) -> list[tuple[float, float, float]]:
    """Earliest time after each event from which |err| stays within band
    until the next event (any output leaving the band resets the clock)."""
    out = []
    event_times = [tm for _, tm in events] + [math.inf]
    for idx, (output, t_event) in enumerate(events):
        t_next = event_times[idx + 1]
        window = (t >= t_event) & (t < t_next)
        if not np.any(window):
            out.append((float(output), float(t_event), math.nan))
            continue
        tw = t[window]
        ew = np.abs(err[window])
        inside = np.all(ew <= band, axis=1)
        # Last sample outside the band decides the settling instant.
        outside = np.nonzero(~inside)[0]
        if len(outside) == 0:
            settle = 0.0
        elif outside[-1] == len(tw) - 1:
            settle = math.nan
        else:
            settle = float(tw[outside[-1] + 1] - t_event)
        out.append((float(output), float(t_event), settle))
    return out


def compute_metrics(
    records: list[SimRecord],
    burn_in: float = DEFAULT_BURN_IN,
    band: float = SETTLE_BAND,
    events: list[tuple[int, float]] | None = None,
) -> MetricsReport:
    """Summarize a run.  ``events`` (output, time) default to none; pass the
    reference program's step times to get settling figures."""
    t = np.array([r.t for r in records])
    h = np.array([r.h for r in records])
    sat_steps = int(sum(bool(np.any(r.sat)) for r in records))

    tracking = None
    settling = None
    if records and records[0].y_r is not None:
        y_r = np.array([r.y_r for r in records])
        err = h[:, :2] - y_r
        tracking = tuple(_rmse(err[:, i]) for i in range(2))
        if events:
            settling = tuple(_settling(t, err, events, band))

    estimation = None
    if records and records[0].xhat is not None:
        xhat = np.array([r.xhat for r in records])
        keep = t >= burn_in
        if np.any(keep):
            estimation = tuple(_rmse((xhat - h)[keep, i]) for i in range(h.shape[1]))

    return MetricsReport(
        tracking_rmse=tracking,
        settling_times=settling,
        estimation_rmse=estimation,
        estimation_burn_in=burn_in,
        saturation_steps=sat_steps,
        n_records=len(records),
    )


def metrics_from_columns(
    cols: dict[str, np.ndarray], burn_in: float = DEFAULT_BURN_IN
) -> MetricsReport:
    """Recompute the summary from CSV columns (see scenario.read_csv)."""
    t = cols["t"]
    h = np.column_stack([cols["h1"], cols["h2"], cols["h3"]])
    sat = np.nan_to_num(np.column_stack([cols["sat1"], cols["sat2"]]))
    sat_steps = int(np.sum(np.any(sat > 0.5, axis=1)))

    tracking = None
    if not np.all(np.isnan(cols["yr1"])):
        y_r = np.column_stack([cols["yr1"], cols["yr2"]])
        err = h[:, :2] - y_r
        tracking = tuple(_rmse(err[:, i]) for i in range(2))

    estimation = None
    if not np.all(np.isnan(cols["xhat1"])):
        xhat = np.column_stack([cols["xhat1"], cols["xhat2"], cols["xhat3"]])
        keep = t >= burn_in
        if np.any(keep):
            estimation = tuple(_rmse((xhat - h)[keep, i]) for i in range(3))

    return MetricsReport(
        tracking_rmse=tracking,
        settling_times=None,
        estimation_rmse=estimation,
        estimation_burn_in=burn_in,
        saturation_steps=sat_steps,
        n_records=len(t),
    )
