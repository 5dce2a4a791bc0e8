"""Spearman / Fisher-Z similarity matrices between segment-embedding sets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConstantVector

CLAMP_EPS = 1e-7
Z_MAX = math.atanh(1 - CLAMP_EPS)


def rank_average(x) -> np.ndarray:
    """1-based ranks, tied values sharing the mean of their positions."""
    a = np.asarray(x, dtype=np.float64).ravel()
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    # boundaries of runs of equal values in sorted order
    edges = np.flatnonzero(np.diff(sorted_a) != 0) + 1
    starts = np.concatenate(([0], edges))
    stops = np.concatenate((edges, [a.size]))
    ranks = np.empty(a.size)
    ranks[order] = np.repeat((starts + stops + 1) / 2.0, stops - starts)
    return ranks


def _centered_ranks(x) -> np.ndarray:
    r = rank_average(x)
    r -= r.mean()
    return r


def _corr_centered(ra: np.ndarray, rb: np.ndarray) -> float:
    # np.dot on 1-d float64 sums index-by-index, so swapping arguments is exact
    saa = float(np.dot(ra, ra))
    sbb = float(np.dot(rb, rb))
    if saa == 0 or sbb == 0:
        raise ConstantVector()
    r = float(np.dot(ra, rb)) / math.sqrt(saa * sbb)
    return min(1.0, max(-1.0, r))


def spearman(x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 3:
        raise ValueError("spearman needs at least 3 observations")
    return _corr_centered(_centered_ranks(x), _centered_ranks(y))


def fisher_z(r: float) -> float:
    if abs(r) > 1:
        raise ValueError(f"correlation out of range: {r}")
    return math.atanh(min(1 - CLAMP_EPS, max(-(1 - CLAMP_EPS), r)))


@dataclass
class SimilarityMatrix:
    """Rows are story (or target) segments, columns recall segments.

    ``mode`` is ``"embedding"`` (Fisher-Z units) or ``"rating"`` (proportion
    units). Cells that were never computed, e.g. off-diagonal cells of a
    diagonal-only rating run, hold NaN.
    """

    values: np.ndarray
    mode: str = "embedding"
    row_label: str = ""
    col_label: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("similarity matrix must be 2-d")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def is_complete(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def transpose(self) -> "SimilarityMatrix":
        return SimilarityMatrix(self.values.T.copy(), self.mode, self.col_label, self.row_label)

    def to_dict(self, digits: int = 15) -> dict:
        return {
            "mode": self.mode,
            "row_label": self.row_label,
            "col_label": self.col_label,
            "n": self.n,
            "values": [[round_sig(v, digits) for v in row] for row in self.values.tolist()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimilarityMatrix":
        values = np.array(
            [[np.nan if v is None else v for v in row] for row in data["values"]], dtype=np.float64
        )
        return cls(values, data["mode"], data.get("row_label", ""), data.get("col_label", ""))

    def dump(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SimilarityMatrix":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def round_sig(value: float | None, digits: int = 15) -> float | None:
    """Round to ``digits`` significant digits; NaN/None become None."""
    if value is None or not math.isfinite(value):
        return None
    return float(format(value, f".{digits}g"))


def build_matrix(
    rows: Sequence[np.ndarray],
    cols: Sequence[np.ndarray],
    row_label: str = "",
    col_label: str = "",
) -> SimilarityMatrix:
    """Fisher-Z transformed Spearman correlation of every row/column vector pair."""
    if len(rows) < 2 or len(cols) < 2:
        raise ValueError("need at least two row and two column vectors")
    dims = {np.asarray(v).size for v in (*rows, *cols)}
    if len(dims) != 1:
        raise ValueError(f"vectors differ in dimension: {sorted(dims)}")

    def prepare(vectors, axis):
        out = []
        for k, v in enumerate(vectors):
            r = _centered_ranks(v)
            if not np.any(r):
                cell = (k, 0) if axis == 0 else (0, k)
                raise ConstantVector("constant embedding vector", cell=cell)
            out.append(r)
        return out

    rr, cr = prepare(rows, 0), prepare(cols, 1)
    values = np.empty((len(rr), len(cr)))
    for i, a in enumerate(rr):
        for j, b in enumerate(cr):
            values[i, j] = fisher_z(_corr_centered(a, b))
    return SimilarityMatrix(values, "embedding", row_label, col_label)
