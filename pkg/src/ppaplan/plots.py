"""Figure rendering for the CLI report paths (Agg backend, files only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def correlation_figure(records, path) -> None:
    ppa = [r.ppa_mesh for r in records]
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    axes[0].scatter(ppa, [r.pixels_per_triangle for r in records], s=12)
    axes[0].set_xlabel("mean mesh PPA [1/m]")
    axes[0].set_ylabel("pixels per triangle")
    axes[1].scatter(ppa, [r.coverage_ratio for r in records], s=12, c="tab:red")
    axes[1].set_xlabel("mean mesh PPA [1/m]")
    axes[1].set_ylabel("coverage ratio")
    axes[2].scatter(ppa, [r.ppa_cuboid for r in records], s=12, c="tab:green")
    axes[2].set_xlabel("mean mesh PPA [1/m]")
    axes[2].set_ylabel("mean cuboid PPA [1/m]")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def metrics_figure(rows, path) -> None:
    """Bar chart of coverage and Chamfer distance per planner.

    rows: list of (planner, coverage_pct, cd_mm).
    """
    names = [r[0] for r in rows]
    cov = [r[1] for r in rows]
    cd = [r[2] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.6))
    ax1.bar(names, cov, color="tab:blue")
    ax1.set_ylabel("coverage [%]")
    ax1.tick_params(axis="x", rotation=30)
    ax2.bar(names, cd, color="tab:orange")
    ax2.set_ylabel("Chamfer distance [mm]")
    ax2.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def trajectory_figure(runs: dict, actor_xy: np.ndarray, path) -> None:
    """Top-down camera paths per planner plus the actor trajectory."""
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.plot(actor_xy[:, 0], actor_xy[:, 1], "k--", label="actor")
    for name, run in runs.items():
        xy = np.array([s.camera_after.position[:2] for s in run.steps])
        ax.plot(xy[:, 0], xy[:, 1], label=name)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def tour_figure(tour, patches, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 6))
    vp = tour.viewpoints
    ax.plot(vp[:, 0], vp[:, 1], "o-", label="tour")
    for k, (x, y) in enumerate(vp[:, :2]):
        ax.annotate(str(k), (x, y))
    cents = np.array([p.centroid for p in patches])
    ax.scatter(cents[:, 0], cents[:, 1], c="tab:red", marker="^", label="patches")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
