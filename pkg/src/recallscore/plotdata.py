"""Plot-ready exports from a finished run: group-mean matrices, long CSV tables, figures."""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from . import plotting
from .isc import ISC_METRICS
from .matrix import SimilarityMatrix
from .metrics import SCALAR_METRICS

logger = logging.getLogger(__name__)

CSV_HEADER = ["participant", "group", "story", "condition", "segment_count", "metric", "value"]


def _fmt(value) -> str:
    return "" if value is None else format(value, ".15g")


def _write_long_csv(path: Path, rows: list[list]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(rows)
    return path


def group_mean_matrices(report: dict, report_dir: str | Path) -> dict[tuple, SimilarityMatrix]:
    """Entrywise mean story x recall matrix per (mode, n, group, condition)."""
    report_dir = Path(report_dir)
    stacks: dict[tuple, list[np.ndarray]] = {}
    for e in report["results"]:
        key = (e["mode"], e["segment_count"], e["group"], e["condition"])
        stacks.setdefault(key, []).append(SimilarityMatrix.load(report_dir / e["matrix"]).values)
    out = {}
    for key, mats in sorted(stacks.items()):
        mode, n, group, cond = key
        # NaN (never-rated cells) stays NaN in the mean
        out[key] = SimilarityMatrix(np.mean(np.stack(mats), axis=0), mode, f"{group}:{cond}", f"{group}:{cond}")
    return out


def emit_plot_data(report: dict, out_dir: str | Path, report_dir: str | Path, figures: bool = True) -> list[Path]:
    """Write group-mean matrices, long-format metric tables and (optionally) figures.

    ``report_dir`` is the run directory the report's matrix paths are relative to.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    for (mode, n, group, cond), matrix in group_mean_matrices(report, report_dir).items():
        stem = out / mode / f"n{n}" / f"mean_{group}_{cond}"
        matrix.dump(stem.with_suffix(".json"))
        written.append(stem.with_suffix(".json"))
        if figures:
            title = f"{group.replace('_', '-')} / {cond} (n={n})"
            written.append(plotting.heatmap(matrix.values, stem.with_suffix(".png"), title))

    modes = sorted({e["mode"] for e in report["results"]})
    for mode in modes:
        entries = [e for e in report["results"] if e["mode"] == mode]
        for source, name in (("metrics", "metrics"), ("chance", "chance")):
            rows = [
                [e["participant_id"], e["group"], e["story_id"], e["condition"], e["segment_count"], metric,
                 _fmt(e[source][metric])]
                for e in entries
                if e[source] is not None
                for metric in SCALAR_METRICS
            ]
            if rows:
                written.append(_write_long_csv(out / f"{name}_{mode}.csv", rows))

    isc = report.get("isc") or {}
    if isc.get("per_story"):
        path = out / "isc.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["participant", "group", "story", "condition", "segment_count", "reference", "metric", "value"])
            for e in isc["per_story"]:
                for side in ("own", "other"):
                    if e[side] is None:
                        continue
                    for metric in ISC_METRICS:
                        writer.writerow([e["participant_id"], e["group"], e["story_id"], e["condition"],
                                         e["segment_count"], side, metric, _fmt(e[side][metric])])
        written.append(path)

    if figures:
        written.extend(_summary_figures(report, out))
    return written


def _summary_figures(report: dict, out: Path) -> list[Path]:
    paths = []
    keyed: dict[tuple, dict[str, dict[str, list[float]]]] = {}
    for row in report["condition_averages"]:
        slot = keyed.setdefault((row["mode"], row["segment_count"]), {})
        per_cond = slot.setdefault(row["condition"], {})
        for metric in ("max_recall", "original_order", "reversed_order", "primacy", "middle", "recency"):
            value = row["metrics"][metric]
            if value is not None:
                per_cond.setdefault(metric, []).append(value)
        if row["chance"] is not None and row["chance"]["max_recall"] is not None:
            per_cond.setdefault("chance_max_recall", []).append(row["chance"]["max_recall"])
    metrics = ["max_recall", "chance_max_recall", "original_order", "reversed_order", "primacy", "middle", "recency"]
    for (mode, n), per_cond in sorted(keyed.items()):
        means = {c: {m: float(np.mean(v)) for m, v in d.items()} for c, d in per_cond.items()}
        shown = [m for m in metrics if any(m in d for d in means.values())]
        paths.append(
            plotting.condition_bars(means, out / mode / f"n{n}" / "condition_means.png", shown,
                                    title=f"{mode} scores, n={n}")
        )
    return paths
