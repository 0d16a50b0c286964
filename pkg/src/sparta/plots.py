"""Figure rendering for CLI reports: every chart lands next to its CSV.

Headless Agg backend only; these helpers never open windows and are safe to
skip entirely (reports stay usable from the CSV/JSON alone).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .terrain import Terrain


def render_loss_curves(epochs, train_loss, test_loss, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(epochs, train_loss, label="train")
    if test_loss is not None:
        ax.plot(epochs, test_loss, label="test")
    ax.set_xlabel("epoch")
    ax.set_ylabel("EMD$^2$")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_success_bars(rows, path) -> None:
    labels = [
        r["algorithm"]
        + (f" a={r['alpha']}" if r["alpha"] is not None else "")
        + (f" n={r['n']}" if r["n"] is not None else "")
        for r in rows
    ]
    rates = [100.0 * r["success_rate"] for r in rows]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(rows)), 3.4))
    ax.bar(np.arange(len(rows)), rates, color="tab:blue")
    ax.set_xticks(np.arange(len(rows)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("success rate [%]")
    ax.set_ylim(0, 100)
    for i, v in enumerate(rates):
        ax.text(i, v + 1, f"{v:.0f}", ha="center", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_cvar_sweep(phis, cvars, path, alpha: float = 0.9) -> None:
    """Polar arc of CVaR versus approach angle for one patch."""
    fig = plt.figure(figsize=(4, 4))
    ax = fig.add_subplot(projection="polar")
    ax.plot(phis, cvars, color="tab:red")
    ax.set_title(f"CVaR(alpha={alpha}) vs approach angle", fontsize=9)
    ax.set_ylim(0, 1)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_plan(terrain: Terrain, results, labels, path) -> None:
    """Heightmap with one or more planned paths overlaid."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    extent = [
        terrain.origin[0],
        terrain.x_max(),
        terrain.origin[1],
        terrain.y_max(),
    ]
    im = ax.imshow(terrain.heights, origin="lower", extent=extent, cmap="terrain")
    fig.colorbar(im, ax=ax, label="height [m]")
    for result, label, graph in results:
        xs, ys = [], []
        for ix, iy, _ in result.path:
            x, y = graph.node_xy((ix, iy))
            xs.append(x)
            ys.append(y)
        ax.plot(xs, ys, marker="o", markersize=2.5, label=label)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    if labels:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
