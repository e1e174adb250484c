"""Render growth traces, sweep curves, and proximity heatmaps to image files.

All rendering is headless (Agg backend); figures land next to the CSV
outputs they visualize.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .engine import IterationRecord
from .metrics import ProximityMatrix, SensitivityResult


def plot_trace(trace: Sequence[IterationRecord], path: str | Path) -> None:
    """Corpus size as a function of iteration for a single run."""
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [rec.n for rec in trace]
    ys = [rec.c_size for rec in trace]
    ax.plot(xs, ys, marker="o")
    ax.set_xlabel("iteration")
    ax.set_ylabel("corpus size")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sweep(result: SensitivityResult, path: str | Path) -> None:
    """One growth curve per keyword-count value."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for n_k in sorted(result.n_k_values):
        trace = result.traces[n_k]
        ax.plot(
            [rec.n for rec in trace],
            [rec.c_size for rec in trace],
            marker="o",
            markersize=3,
            label=f"n_k={n_k}",
        )
    ax.set_xlabel("iteration")
    ax.set_ylabel("corpus size")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_proximity(matrix: ProximityMatrix, path: str | Path) -> None:
    """Annotated heatmap of the pairwise proximity matrix."""
    n = len(matrix.labels)
    fig, ax = plt.subplots(figsize=(1.0 + 0.8 * n, 0.8 + 0.8 * n))
    image = ax.imshow(matrix.values, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(np.arange(n), labels=matrix.labels, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(np.arange(n), labels=matrix.labels, fontsize=8)
    for i in range(n):
        for j in range(n):
            value = matrix.values[i, j]
            color = "white" if value < 0.5 else "black"
            ax.text(j, i, f"{value:.2f}", ha="center", va="center", color=color, fontsize=7)
    fig.colorbar(image, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
