"""Figure rendering for scenario runs: levels/references and error/input plots.

Rendering is file-based (Agg backend) so it works headless; the CSV remains
the primary run artifact and these plots are a convenience layered on top of
the same records.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .scenario import SimRecord


def _stack(records, attr, width):
    vals = [getattr(r, attr) for r in records]
    if vals and vals[0] is None:
        return None
    return np.array(vals).reshape(len(vals), width)


def render_figures(records: list[SimRecord], out_dir, stem: str) -> list[str]:
    """Write the level-tracking and diagnostics figures; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    t = np.array([r.t for r in records])
    h = _stack(records, "h", 3)
    y_r = _stack(records, "y_r", 2)
    u = _stack(records, "u", 2)
    zeta = _stack(records, "zeta", 2)
    xhat = _stack(records, "xhat", 3)
    paths = []

    fig, ax = plt.subplots(figsize=(7, 4))
    for i in range(3):
        ax.plot(t, h[:, i], label=f"h{i + 1}")
    if y_r is not None:
        for i in range(2):
            ax.plot(t, y_r[:, i], "k--", linewidth=0.9, label=f"ref {i + 1}" if i == 0 else None)
    if xhat is not None:
        for i in range(3):
            ax.plot(t, xhat[:, i], ":", linewidth=1.1, label=f"est h{i + 1}")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("level [m]")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = os.path.join(out_dir, f"{stem}_levels.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    paths.append(path)

    n_rows = 2 + (zeta is not None)
    fig, axes = plt.subplots(n_rows, 1, figsize=(7, 2.4 * n_rows), sharex=True)
    axes = np.atleast_1d(axes)
    if y_r is not None:
        for i in range(2):
            axes[0].plot(t, h[:, i] - y_r[:, i], label=f"e{i + 1}")
        axes[0].set_ylabel("tracking error [m]")
    elif xhat is not None:
        for i in range(3):
            axes[0].plot(t, xhat[:, i] - h[:, i], label=f"est err {i + 1}")
        axes[0].set_ylabel("estimation error [m]")
    else:
        for i in range(3):
            axes[0].plot(t, h[:, i], label=f"h{i + 1}")
        axes[0].set_ylabel("level [m]")
    axes[0].legend(loc="best", fontsize=8)
    for i in range(2):
        axes[1].plot(t, u[:, i], label=f"q{i + 1}")
    axes[1].set_ylabel("pump flow [m^3/s]")
    axes[1].legend(loc="best", fontsize=8)
    if zeta is not None:
        for i in range(2):
            axes[2].plot(t, zeta[:, i], label=f"zeta{i + 1}")
        axes[2].set_ylabel("outer-loop input [m/s]")
        axes[2].legend(loc="best", fontsize=8)
    axes[-1].set_xlabel("t [s]")
    fig.tight_layout()
    path = os.path.join(out_dir, f"{stem}_diagnostics.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    paths.append(path)
    return paths
