"""Automated scoring of free-recall transcripts against source stories."""

from .embedding import Embedder, ProviderConfig, embed_batch, stub_embed
from .isc import ParticipantRecall, isc_aggregate, isc_pair
from .manifest import StudyManifest, parse_manifest, validate_manifest
from .matrix import SimilarityMatrix, build_matrix, fisher_z, spearman
from .metrics import (
    RecallMetrics,
    chance_metrics,
    compute_metrics,
    condition_average,
    distinctiveness,
    max_recall,
    order_scores,
    primacy_recency,
    temporal_divergence,
)
from .pipeline import run, score_segments, score_texts
from .rater import RaterConfig, build_prompt, parse_rating, rate_matrix, repair_punctuation
from .report import diff_reports
from .segmenter import segment, tokenize

__version__ = "0.1.0"

__all__ = [
    "Embedder",
    "ParticipantRecall",
    "ProviderConfig",
    "RaterConfig",
    "RecallMetrics",
    "SimilarityMatrix",
    "StudyManifest",
    "build_matrix",
    "build_prompt",
    "chance_metrics",
    "compute_metrics",
    "condition_average",
    "diff_reports",
    "distinctiveness",
    "embed_batch",
    "fisher_z",
    "isc_aggregate",
    "isc_pair",
    "max_recall",
    "order_scores",
    "parse_manifest",
    "parse_rating",
    "primacy_recency",
    "rate_matrix",
    "repair_punctuation",
    "run",
    "score_segments",
    "score_texts",
    "segment",
    "spearman",
    "stub_embed",
    "temporal_divergence",
    "tokenize",
    "validate_manifest",
]
