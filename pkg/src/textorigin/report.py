"""Figure rendering for the CLI report path.

Each report command writes its delimited output and, unless figures are
disabled, a PNG rendering of the same data next to it. The CSV stays the
canonical machine-readable artifact; figures are for eyeballs.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .attribution import DependenceSeries, GlobalImportance
from .datasetops import Metrics


def figure_path(output: str | Path) -> Path:
    return Path(output).with_suffix(".png")


def render_importance(gi: GlobalImportance, path: str | Path) -> None:
    order = np.argsort(gi.mean_abs_phi)
    names = [gi.feature_names[i] for i in order]
    values = gi.mean_abs_phi[order]
    fig, ax = plt.subplots(figsize=(7, 0.35 * len(names) + 1.2))
    ax.barh(names, values, color="#4878cf")
    ax.set_xlabel("mean |phi| (margin units)")
    ax.set_title(f"Feature importance over {gi.sample_count} samples")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_dependence(series: DependenceSeries, path: str | Path) -> None:
    values = [v for v, _ in series.pairs]
    phis = [p for _, p in series.pairs]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.scatter(values, phis, s=9, alpha=0.45, color="#4878cf", edgecolors="none")
    ax.axhline(0.0, color="gray", lw=0.8)
    ax.set_xlabel(series.feature)
    ax.set_ylabel("phi (margin units)")
    ax.set_title(f"Attribution dependence: {series.feature}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_metrics_table(rows: list[tuple[str, Metrics]], path: str | Path,
                         title: str = "Metrics by approach") -> None:
    names = [name for name, _ in rows]
    keys = ("accuracy", "precision", "recall", "f1")
    width = 0.2
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(1.9 * len(names) + 2.5, 4.2))
    for i, key in enumerate(keys):
        vals = [getattr(m, key) for _, m in rows]
        ax.bar(x + (i - 1.5) * width, vals, width, label=key)
    ax.set_xticks(x, names, rotation=15)
    ax.set_ylim(0, 1.05)
    ax.legend(ncols=4, fontsize=8)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_heatmap(matrix: pd.DataFrame, path: str | Path,
                   title: str = "F1 per generator and topic") -> None:
    fig, ax = plt.subplots(
        figsize=(0.9 * len(matrix.columns) + 3, 0.5 * len(matrix.index) + 2))
    data = matrix.to_numpy(dtype=float)
    masked = np.ma.masked_invalid(data)
    im = ax.imshow(masked, cmap="viridis", vmin=0.0, vmax=1.0, aspect="auto")
    ax.set_xticks(range(len(matrix.columns)), matrix.columns, rotation=30, ha="right")
    ax.set_yticks(range(len(matrix.index)), matrix.index)
    for i in range(data.shape[0]):
        for j in range(data.shape[1]):
            if np.isfinite(data[i, j]):
                ax.text(j, i, f"{data[i, j]:.2f}", ha="center", va="center",
                        color="white", fontsize=8)
    fig.colorbar(im, ax=ax, label="F1")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
