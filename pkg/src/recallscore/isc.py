"""Intersubject similarity of recalls (recall x recall matrices)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import IncomparablePair, NoPeers
from .matrix import SimilarityMatrix, build_matrix
from .metrics import max_recall, order_scores, temporal_divergence

ISC_METRICS = ("original_order", "reversed_order", "temporal_divergence")


@dataclass
class ParticipantRecall:
    participant_id: str
    group: str
    story_id: str
    condition: str
    embeddings: Sequence[np.ndarray]
    language: str = ""


@dataclass(frozen=True)
class PairScores:
    peer_id: str
    peer_group: str
    original_order: float
    reversed_order: float
    temporal_divergence: float


@dataclass
class IscScores:
    participant_id: str
    group: str
    story_id: str
    condition: str
    pairs: list[PairScores] = field(default_factory=list)
    own: dict[str, float] | None = None
    other: dict[str, float] | None = None

    @property
    def own_count(self) -> int:
        return sum(p.peer_group == self.group for p in self.pairs)

    @property
    def other_count(self) -> int:
        return len(self.pairs) - self.own_count


def isc_matrix(a: ParticipantRecall, b: ParticipantRecall) -> SimilarityMatrix:
    if a.story_id != b.story_id or a.condition != b.condition:
        raise IncomparablePair(
            f"{a.participant_id}/{a.story_id}/{a.condition} vs "
            f"{b.participant_id}/{b.story_id}/{b.condition}"
        )
    if a.participant_id == b.participant_id:
        raise IncomparablePair(f"participant {a.participant_id} compared with itself")
    return build_matrix(a.embeddings, b.embeddings, a.participant_id, b.participant_id)


def pair_scores(matrix: SimilarityMatrix) -> tuple[float, float, float]:
    original, reversed_ = order_scores(matrix)
    _, idx = max_recall(matrix)
    return original, reversed_, temporal_divergence(idx)


def isc_pair(a: ParticipantRecall, b: ParticipantRecall) -> tuple[float, float, float]:
    """(original_order, reversed_order, temporal_divergence) with ``a`` as rows."""
    return pair_scores(isc_matrix(a, b))


def _mean_scores(pairs: list[PairScores]) -> dict[str, float] | None:
    if not pairs:
        return None
    return {name: float(np.mean([getattr(p, name) for p in pairs])) for name in ISC_METRICS}


def isc_aggregate(
    target: ParticipantRecall,
    peers: Sequence[ParticipantRecall],
    matrices: dict[str, SimilarityMatrix] | None = None,
) -> IscScores:
    """Score ``target`` against every peer and average own- vs other-group pairs.

    If ``matrices`` is given, each pair matrix is stored under the peer id.
    """
    peers = [p for p in peers if p.participant_id != target.participant_id]
    if not peers:
        raise NoPeers(f"no peers for {target.participant_id} on {target.story_id}/{target.condition}")
    pairs = []
    for peer in sorted(peers, key=lambda p: p.participant_id):
        m = isc_matrix(target, peer)
        if matrices is not None:
            matrices[peer.participant_id] = m
        pairs.append(PairScores(peer.participant_id, peer.group, *pair_scores(m)))
    return IscScores(
        participant_id=target.participant_id,
        group=target.group,
        story_id=target.story_id,
        condition=target.condition,
        pairs=pairs,
        own=_mean_scores([p for p in pairs if p.peer_group == target.group]),
        other=_mean_scores([p for p in pairs if p.peer_group != target.group]),
    )
