"""Matplotlib figures for run outputs.

Uses the non-interactive Agg backend; every function writes a file and closes
its figure.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

CONDITION_COLORS = {"clear": "#3b6fb6", "babble": "#d0723a"}


def heatmap(
    values: np.ndarray,
    path: str | Path,
    title: str = "",
    row_name: str = "story segment",
    col_name: str = "recall segment",
    vmin: float | None = None,
    vmax: float | None = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.asarray(values, dtype=float)
    n_rows, n_cols = values.shape
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 3.2))
        img = ax.imshow(np.ma.masked_invalid(values), cmap="viridis", vmin=vmin, vmax=vmax, origin="upper")
        ax.set_xticks(range(n_cols), [str(j + 1) for j in range(n_cols)])
        ax.set_yticks(range(n_rows), [str(i + 1) for i in range(n_rows)])
        if max(n_rows, n_cols) > 12:
            # every other label keeps 14/18-segment axes readable
            ax.set_xticks(range(0, n_cols, 2), [str(j + 1) for j in range(0, n_cols, 2)])
            ax.set_yticks(range(0, n_rows, 2), [str(i + 1) for i in range(0, n_rows, 2)])
        ax.set_xlabel(col_name)
        ax.set_ylabel(row_name)
        if title:
            ax.set_title(title)
        fig.colorbar(img, ax=ax, fraction=0.046, pad=0.04)
        fig.savefig(path)
        plt.close(fig)
    return path


def condition_bars(
    means: Mapping[str, Mapping[str, float]],
    path: str | Path,
    metrics: Sequence[str],
    title: str = "",
) -> Path:
    """Grouped bars: one group per metric, one bar per condition.

    ``means`` maps condition -> metric -> value; missing values are skipped.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    conditions = [c for c in ("clear", "babble") if c in means] + sorted(set(means) - {"clear", "babble"})
    width = 0.8 / max(len(conditions), 1)
    x = np.arange(len(metrics))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(1.0 + 0.9 * len(metrics), 3.0))
        for k, cond in enumerate(conditions):
            heights = [means[cond].get(m, np.nan) for m in metrics]
            ax.bar(x + (k - (len(conditions) - 1) / 2) * width, heights, width,
                   label=cond, color=CONDITION_COLORS.get(cond))
        ax.set_xticks(x, [m.replace("_", "\n") for m in metrics])
        ax.axhline(0, color="0.3", lw=0.6)
        ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        fig.savefig(path)
        plt.close(fig)
    return path
