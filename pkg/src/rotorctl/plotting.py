"""Static figures of simulated trajectories, written to files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .basis import OperatorSet  # noqa: E402
from .io import trajectory_rows  # noqa: E402


def plot_trajectory(path: str | Path, ops: OperatorSet, times: np.ndarray, states: np.ndarray, title: str = "") -> Path:
    """Shell populations and orientation versus time, saved as PNG."""
    path = Path(path)
    rows = trajectory_rows(ops, times, states)
    pops = np.abs(states) ** 2
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7.0, 5.0))
    for ell in range(ops.ordering.ell_min, ops.ell_max + 1):
        sl = ops.ordering.shell_slice(ell)
        ax1.plot(times, pops[:, sl].sum(axis=1), label=f"l={ell}", lw=1.2)
    ax1.set_ylabel("shell population")
    ax1.set_ylim(-0.02, 1.02)
    ax1.legend(loc="best", fontsize=8, frameon=False)
    ax2.plot(times, rows[:, -1], color="k", lw=1.0)
    ax2.set_ylabel(r"$\langle\cos\theta\rangle$")
    ax2.set_xlabel("t")
    if title:
        ax1.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
