"""Recall scores extracted from a story x recall similarity matrix.

All index vectors are 1-based to match how recall order is usually reported.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import BadN, MissingLabel, NoControls
from .matrix import SimilarityMatrix

SCALAR_METRICS = (
    "max_recall",
    "original_order",
    "reversed_order",
    "distinctiveness",
    "temporal_divergence",
    "primacy",
    "middle",
    "recency",
)


@dataclass(frozen=True)
class RecallMetrics:
    n: int
    max_recall: float | None
    max_indices: tuple[float, ...] | None
    original_order: float | None
    reversed_order: float | None
    distinctiveness: float | None
    temporal_divergence: float | None
    primacy: float | None
    middle: float | None
    recency: float | None

    def scalars(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in SCALAR_METRICS}

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "RecallMetrics":
        kwargs = {f.name: data.get(f.name) for f in fields(cls)}
        if kwargs["max_indices"] is not None:
            kwargs["max_indices"] = tuple(kwargs["max_indices"])
        return cls(**kwargs)


def _values(m) -> np.ndarray:
    v = m.values if isinstance(m, SimilarityMatrix) else np.asarray(m, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {v.shape}")
    if v.shape[0] < 2:
        raise BadN("matrix needs n >= 2")
    return v


def max_recall(m) -> tuple[float, tuple[int, ...]]:
    """Mean of row maxima, and the 1-based column of each row's maximum.

    ``np.argmax`` returns the first occurrence, so ties go to the lowest column.
    """
    v = _values(m)
    idx = np.argmax(v, axis=1)
    row_max = v[np.arange(v.shape[0]), idx]
    return float(np.mean(row_max)), tuple(int(i) + 1 for i in idx)


def order_scores(m) -> tuple[float, float]:
    """Means of the main diagonal and of the anti-diagonal.

    ``math.fsum`` is order independent, so both scores are exactly unchanged
    when the matrix is transposed (the anti-diagonal is then read backwards).
    """
    v = _values(m)
    n = v.shape[0]
    return math.fsum(np.diag(v)) / n, math.fsum(np.diag(v[:, ::-1])) / n


def row_max_z(row) -> float:
    row = np.asarray(row, dtype=np.float64)
    # exact test: np.std of a constant row can come out as a tiny nonzero value
    if np.all(row == row[0]):
        return 0.0
    dev = row - row.mean()
    # z-scores are scale free; rescaling first keeps tiny rows from underflowing
    dev = dev / np.max(np.abs(dev))
    return float(np.max(dev) / np.std(dev, ddof=1))


def distinctiveness(m) -> float:
    """Mean over rows of the largest within-row z-score (sample SD)."""
    v = _values(m)
    return float(np.mean([row_max_z(row) for row in v]))


def temporal_divergence(max_indices: Sequence[float]) -> float:
    """RMSE between recalled positions and the identity order 1..n."""
    idx = np.asarray(max_indices, dtype=np.float64)
    expected = np.arange(1, idx.size + 1)
    return math.sqrt(float(np.mean((idx - expected) ** 2)))


def middle_positions(n: int) -> tuple[int, int]:
    """1-based positions of the two middle diagonal cells."""
    m = n // 2
    return m, m + 1


def primacy_recency(m) -> tuple[float, float, float]:
    v = m.values if isinstance(m, SimilarityMatrix) else np.asarray(m, dtype=np.float64)
    n = v.shape[0]
    if n < 6:
        raise BadN(f"primacy/recency needs n >= 6, got {n}")
    d = np.diag(v)
    lo, hi = middle_positions(n)
    return (
        float(np.mean(d[:2])),
        float(np.mean(d[lo - 1 : hi])),
        float(np.mean(d[-2:])),
    )


def compute_metrics(m) -> RecallMetrics:
    """Full metric bundle.

    Incomplete matrices (diagonal-only rating runs) yield only the
    diagonal-based scores; everything else is ``None``.
    """
    v = m.values if isinstance(m, SimilarityMatrix) else np.asarray(m, dtype=np.float64)
    n = v.shape[0]
    diag = np.diag(v)
    complete = bool(np.all(np.isfinite(v)))
    if not complete and not np.all(np.isfinite(diag)):
        raise ValueError("matrix diagonal has missing cells")

    if complete:
        score, idx = max_recall(v)
        original, reversed_ = order_scores(v)
        distinct = distinctiveness(v)
        divergence = temporal_divergence(idx)
    else:
        score = idx = reversed_ = distinct = divergence = None
        original = math.fsum(diag) / n

    if n >= 6:
        primacy, middle, recency = primacy_recency(v)
    else:
        primacy = middle = recency = None

    return RecallMetrics(
        n=n,
        max_recall=score,
        max_indices=idx,
        original_order=original,
        reversed_order=reversed_,
        distinctiveness=distinct,
        temporal_divergence=divergence,
        primacy=primacy,
        middle=middle,
        recency=recency,
    )


def _mean_or_none(values: list):
    if any(v is None for v in values):
        return None
    return float(np.mean(values))


def average_metrics(bundles: Iterable[RecallMetrics]) -> RecallMetrics:
    """Fieldwise mean of metric bundles; a field missing anywhere stays missing."""
    bundles = list(bundles)
    if not bundles:
        raise ValueError("nothing to average")
    ns = {b.n for b in bundles}
    if len(ns) != 1:
        raise ValueError(f"cannot average bundles with different n: {sorted(ns)}")
    idx_lists = [b.max_indices for b in bundles]
    if any(x is None for x in idx_lists):
        mean_idx = None
    else:
        mean_idx = tuple(float(x) for x in np.mean(np.asarray(idx_lists, dtype=np.float64), axis=0))
    return RecallMetrics(
        n=bundles[0].n,
        max_indices=mean_idx,
        **{name: _mean_or_none([getattr(b, name) for b in bundles]) for name in SCALAR_METRICS},
    )


def chance_metrics(story_embeddings, other_recalls: Sequence, build=None) -> RecallMetrics:
    """Average metrics of the story scored against recalls of *other* stories.

    ``other_recalls`` holds either recall embedding lists (scored with
    :func:`recallscore.matrix.build_matrix`) or ready-made matrices.
    """
    from .matrix import build_matrix

    if not other_recalls:
        raise NoControls("no control recalls for the chance estimate")
    build = build or build_matrix
    bundles = []
    for other in other_recalls:
        matrix = other if isinstance(other, SimilarityMatrix) else build(story_embeddings, other)
        bundles.append(compute_metrics(matrix))
    return average_metrics(bundles)


def condition_average(
    per_story: Mapping[str, RecallMetrics],
    condition_of: Mapping[str, str] | Callable[[str], str],
) -> dict[str, RecallMetrics]:
    """Fieldwise means per condition label (e.g. ``clear`` / ``babble``)."""
    lookup = condition_of if callable(condition_of) else condition_of.get
    groups: dict[str, list[RecallMetrics]] = {}
    for story_id in sorted(per_story):
        label = lookup(story_id)
        if label is None:
            raise MissingLabel(f"story {story_id!r} has no condition label")
        groups.setdefault(label, []).append(per_story[story_id])
    return {label: average_metrics(groups[label]) for label in sorted(groups)}
