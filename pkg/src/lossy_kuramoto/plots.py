"""Matplotlib rendering of simulation results to figure files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .dynamics import Trajectory

# Stable ids inside the emitted SVG documents.
plt.rcParams["svg.hashsalt"] = "lossy-kuramoto"


def _line_figure(traj: Trajectory, values, ylabel: str):
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    n = values.shape[1]
    for i in range(n):
        ax.plot(traj.times, values[:, i], lw=1.0, label=f"node {i + 1}")
    ax.set_xlabel("time (s)")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.4)
    ax.legend(ncol=2, fontsize=8, loc="upper right")
    fig.tight_layout()
    return fig


def phase_figure(traj: Trajectory):
    """Phase angles of every oscillator against time."""
    return _line_figure(traj, traj.states, "phase angle (rad)")


def frequency_figure(traj: Trajectory):
    """Frequency deviations of every oscillator against time."""
    return _line_figure(traj, traj.derivs, "frequency deviation (rad/s)")


def save_figure(fig, path) -> None:
    """Render a figure to file (format inferred from the suffix)."""
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
