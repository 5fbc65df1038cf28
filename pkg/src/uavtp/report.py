"""Figure rendering for run artifacts.

Reads the delimited outputs a run leaves behind (episodes.csv,
trajectory.csv) and renders matplotlib figures next to them. Kept separate
from the simulation path so that numeric artifacts never depend on plotting.
"""

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

FIG_DPI = 150


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_training(episodes_csv, out_png):
    """Total reward and executed steps per episode."""
    rows = _read_csv(episodes_csv)
    eps = [int(r["episode"]) for r in rows]
    rewards = [float(r["total_reward"]) for r in rows]
    steps = [int(r["steps"]) for r in rows]

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(eps, rewards, marker="o", ms=3, lw=1.2, color="tab:blue")
    ax1.set_ylabel("total reward")
    ax1.grid(alpha=0.3)
    ax2.plot(eps, steps, marker="s", ms=3, lw=1.2, color="tab:orange")
    ax2.set_ylabel("steps")
    ax2.set_xlabel("episode")
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=FIG_DPI)
    plt.close(fig)
    return out_png


def plot_trajectory(trajectory_csv, out_png, grid_k=None):
    """UAV waypoint path; start marked green, end with a blue star."""
    rows = _read_csv(trajectory_csv)
    xs = [int(r["x_cell"]) for r in rows]
    ys = [int(r["y_cell"]) for r in rows]

    fig, ax = plt.subplots(figsize=(6, 6))
    ax.plot(xs, ys, lw=0.8, color="0.4", alpha=0.8)
    ax.scatter(xs[0], ys[0], color="green", s=60, zorder=3, label="start")
    ax.scatter(xs[-1], ys[-1], color="blue", marker="*", s=140, zorder=3, label="end")
    if grid_k:
        ax.set_xlim(-0.5, grid_k - 0.5)
        ax.set_ylim(-0.5, grid_k - 0.5)
    ax.set_xlabel("x cell")
    ax.set_ylabel("y cell")
    ax.set_aspect("equal")
    ax.legend(loc="upper right")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=FIG_DPI)
    plt.close(fig)
    return out_png
