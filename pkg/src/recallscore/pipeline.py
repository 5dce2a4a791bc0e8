"""Manifest-driven batch scoring.

For each segment count and scoring mode the pipeline segments every story
and recall, builds story x recall matrices (plus chance controls), extracts
metrics, averages them per condition, and, in embedding mode, computes
recall x recall intersubject scores. Matrices are written as separate JSON
files that the report references by relative path.
"""

from __future__ import annotations

import json
import logging
import shutil
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .embedding import Embedder
from .errors import NoPeers
from .isc import ISC_METRICS, ParticipantRecall, isc_aggregate
from .manifest import StudyManifest
from .matrix import SimilarityMatrix, build_matrix, round_sig
from .metrics import SCALAR_METRICS, RecallMetrics, average_metrics, compute_metrics, condition_average
from .rater import ChatProvider, make_chat_provider, rate_matrix
from .segmenter import SegmentedText, segment

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
REPORT_NAME = "report.json"


def score_segments(
    story_segments: Sequence[str],
    recall_segments: Sequence[str],
    embedder: Embedder,
    row_label: str = "",
    col_label: str = "",
) -> tuple[SimilarityMatrix, RecallMetrics]:
    """Embed two segment lists, correlate them and extract the metric bundle."""
    vectors = embedder.embed_batch(list(story_segments) + list(recall_segments))
    k = len(story_segments)
    m = build_matrix(vectors[:k], vectors[k:], row_label, col_label)
    return m, compute_metrics(m)


def score_texts(
    story: str, recall: str, n: int, embedder: Embedder, overlap: float = 0.2
) -> tuple[SimilarityMatrix, RecallMetrics]:
    return score_segments(segment(story, n, overlap).segments, segment(recall, n, overlap).segments, embedder)


def to_jsonable(obj: Any, digits: int = 15) -> Any:
    """Round floats to ``digits`` significant digits and turn tuples into lists."""
    if isinstance(obj, float):
        return round_sig(obj, digits)
    if isinstance(obj, (np.floating,)):
        return round_sig(float(obj), digits)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: to_jsonable(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v, digits) for v in obj]
    return obj


def write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(data), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _metrics_dict(m: RecallMetrics | None) -> dict | None:
    return None if m is None else m.to_dict()


class _Run:
    def __init__(self, manifest: StudyManifest, out_dir: Path, embedder, provider):
        self.manifest = manifest
        self.cfg = manifest.analysis
        self.out = out_dir
        self.embedder = embedder
        self.provider = provider
        self.results: list[dict] = []
        self.isc_entries: list[dict] = []
        self._lock = threading.Lock()

    # -- helpers ----------------------------------------------------------
    def _dump(self, matrix: SimilarityMatrix, rel: str) -> str:
        matrix.dump(self.out / rel)
        return rel

    def _pool_map(self, fn: Callable, items: list) -> list:
        if self.cfg.workers <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
            return list(pool.map(fn, items))

    # -- main loop --------------------------------------------------------
    def execute(self) -> None:
        for n in self.cfg.segment_counts:
            stories = {
                key: segment(text, n, self.cfg.overlap) for key, text in sorted(self.manifest.stories.items())
            }
            recalls = {
                (r.participant_id, r.story_id): segment(r.transcript, n, self.cfg.overlap)
                for r in self.manifest.recalls
            }
            for mode in self.cfg.modes:
                self._score_mode(n, mode, stories, recalls)

    def _score_mode(self, n: int, mode: str, stories: dict, recalls: dict) -> None:
        m = self.manifest
        if mode == "embedding":
            texts = sorted({t for seg in (*stories.values(), *recalls.values()) for t in seg.segments})
            lookup = dict(zip(texts, self.embedder.embed_batch(texts)))

            def vectors(seg: SegmentedText):
                return [lookup[t] for t in seg.segments]

            def score(story_seg, recall_seg, rl, cl):
                return build_matrix(vectors(story_seg), vectors(recall_seg), rl, cl)

            want_chance = self.cfg.chance
        else:

            def score(story_seg, recall_seg, rl, cl):
                return rate_matrix(story_seg.segments, recall_seg.segments, self.cfg.rater, self.provider, rl, cl)

            want_chance = self.cfg.rating_chance

        units = sorted(m.recalls, key=lambda r: (r.participant_id, r.story_id))
        base = f"matrices/{mode}/n{n}"

        def work(rec):
            pid, sid = rec.participant_id, rec.story_id
            lang = m.participants[pid].language
            story_seg = stories[(sid, lang)]
            matrix = score(story_seg, recalls[(pid, sid)], f"story:{sid}:{lang}", f"recall:{pid}:{sid}")
            entry = {
                "participant_id": pid,
                "group": m.participants[pid].group,
                "language": lang,
                "story_id": sid,
                "condition": rec.condition,
                "segment_count": n,
                "mode": mode,
                "metrics": compute_metrics(matrix).to_dict(),
                "chance": None,
                "matrix": self._dump(matrix, f"{base}/{pid}__{sid}.json"),
                "chance_matrices": [],
            }
            if want_chance:
                others = sorted(r.story_id for r in m.recalls_of(pid) if r.story_id != sid)
                bundles = []
                for other in others:
                    ctrl = score(story_seg, recalls[(pid, other)], f"story:{sid}:{lang}", f"recall:{pid}:{other}")
                    bundles.append(compute_metrics(ctrl))
                    entry["chance_matrices"].append(self._dump(ctrl, f"{base}/{pid}__{sid}__ctrl__{other}.json"))
                if bundles:
                    entry["chance"] = average_metrics(bundles).to_dict()
            # recorded as each unit finishes so a failure keeps completed work
            with self._lock:
                self.results.append(entry)

        self._pool_map(work, units)

        if mode == "embedding" and self.cfg.isc:
            self._isc(n, recalls, lookup)

    def _isc(self, n: int, recalls: dict, lookup: dict) -> None:
        m = self.manifest
        cells: dict[tuple[str, str], list[ParticipantRecall]] = {}
        for r in sorted(m.recalls, key=lambda r: (r.story_id, r.condition, r.participant_id)):
            p = m.participants[r.participant_id]
            cells.setdefault((r.story_id, r.condition), []).append(
                ParticipantRecall(
                    participant_id=p.participant_id,
                    group=p.group,
                    story_id=r.story_id,
                    condition=r.condition,
                    embeddings=[lookup[t] for t in recalls[(p.participant_id, r.story_id)].segments],
                    language=p.language,
                )
            )

        jobs = [(target, members) for members in cells.values() for target in members]

        def work(job):
            target, members = job
            matrices: dict[str, SimilarityMatrix] | None = {} if self.cfg.isc_dumps else None
            try:
                scores = isc_aggregate(target, members, matrices)
            except NoPeers:
                logger.info("no ISC peers for %s on %s/%s", target.participant_id, target.story_id, target.condition)
                return None
            pairs = []
            for p in scores.pairs:
                pair = {
                    "peer_id": p.peer_id,
                    "peer_group": p.peer_group,
                    "original_order": p.original_order,
                    "reversed_order": p.reversed_order,
                    "temporal_divergence": p.temporal_divergence,
                }
                if matrices is not None:
                    rel = f"matrices/isc/n{n}/{target.story_id}/{target.participant_id}__{p.peer_id}.json"
                    pair["matrix"] = self._dump(matrices[p.peer_id], rel)
                pairs.append(pair)
            return {
                "participant_id": target.participant_id,
                "group": target.group,
                "language": target.language,
                "story_id": target.story_id,
                "condition": target.condition,
                "segment_count": n,
                "own_count": scores.own_count,
                "other_count": scores.other_count,
                "own": scores.own,
                "other": scores.other,
                "pairs": pairs,
            }

        self.isc_entries.extend(e for e in self._pool_map(work, jobs) if e is not None)

    # -- aggregation ------------------------------------------------------
    def condition_averages(self) -> list[dict]:
        out = []
        keyed: dict[tuple, list[dict]] = {}
        for e in self.results:
            keyed.setdefault((e["mode"], e["segment_count"], e["participant_id"]), []).append(e)
        for (mode, n, pid), entries in sorted(keyed.items()):
            cond = {e["story_id"]: e["condition"] for e in entries}
            true = condition_average({e["story_id"]: RecallMetrics.from_dict(e["metrics"]) for e in entries}, cond)
            with_chance = [e for e in entries if e["chance"] is not None]
            chance = (
                condition_average({e["story_id"]: RecallMetrics.from_dict(e["chance"]) for e in with_chance}, cond)
                if with_chance
                else {}
            )
            p = self.manifest.participants[pid]
            for label in sorted(true):
                out.append(
                    {
                        "participant_id": pid,
                        "group": p.group,
                        "language": p.language,
                        "segment_count": n,
                        "mode": mode,
                        "condition": label,
                        "stories": sorted(s for s, c in cond.items() if c == label),
                        "metrics": true[label].to_dict(),
                        "chance": _metrics_dict(chance.get(label)),
                    }
                )
        return out

    def isc_condition_means(self) -> list[dict]:
        keyed: dict[tuple, list[dict]] = {}
        for e in self.isc_entries:
            keyed.setdefault((e["segment_count"], e["participant_id"], e["condition"]), []).append(e)
        out = []
        for (n, pid, cond), entries in sorted(keyed.items()):
            p = self.manifest.participants[pid]
            row = {
                "participant_id": pid,
                "group": p.group,
                "language": p.language,
                "segment_count": n,
                "condition": cond,
            }
            for side in ("own", "other"):
                present = [e[side] for e in entries if e[side] is not None]
                row[side] = (
                    {k: float(np.mean([d[k] for d in present])) for k in ISC_METRICS} if present else None
                )
            out.append(row)
        return out

    def group_summary(self, averages: list[dict], isc_means: list[dict]) -> list[dict]:
        lang_counts: dict[str, int] = {}
        for p in self.manifest.participants.values():
            lang_counts[p.language] = lang_counts.get(p.language, 0) + 1

        buckets: dict[tuple, list[float]] = {}

        def add(level, label, mode, n, cond, source, metric, value):
            if value is None:
                return
            buckets.setdefault((level, label, mode, n, cond, source, metric), []).append(value)

        def levels(row):
            yield "group", row["group"]
            if lang_counts.get(row["language"], 0) >= 2:
                yield "language", row["language"]

        for row in averages:
            for level, label in levels(row):
                for source in ("metrics", "chance"):
                    bundle = row[source]
                    if bundle is None:
                        continue
                    for metric in SCALAR_METRICS:
                        add(level, label, row["mode"], row["segment_count"], row["condition"], source, metric, bundle[metric])
        for row in isc_means:
            for level, label in levels(row):
                for side in ("own", "other"):
                    if row[side] is None:
                        continue
                    for metric in ISC_METRICS:
                        add(level, label, "embedding", row["segment_count"], row["condition"], f"isc_{side}", metric, row[side][metric])

        out = []
        for (level, label, mode, n, cond, source, metric), values in sorted(buckets.items()):
            out.append(
                {
                    "level": level,
                    "label": label,
                    "mode": mode,
                    "segment_count": n,
                    "condition": cond,
                    "source": source,
                    "metric": metric,
                    "count": len(values),
                    "mean": float(np.mean(values)),
                    "sd": float(np.std(values, ddof=1)) if len(values) > 1 else None,
                }
            )
        return out

    def report(self) -> dict:
        results = sorted(
            self.results, key=lambda e: (e["mode"], e["segment_count"], e["participant_id"], e["story_id"])
        )
        self.results = results
        averages = self.condition_averages()
        isc_means = self.isc_condition_means()
        isc_entries = sorted(
            self.isc_entries, key=lambda e: (e["segment_count"], e["story_id"], e["condition"], e["participant_id"])
        )
        m = self.manifest
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.cfg.echo(),
            "study": {
                "participants": [
                    {"participant_id": p.participant_id, "group": p.group, "language": p.language}
                    for p in sorted(m.participants.values(), key=lambda p: p.participant_id)
                ],
                "stories": m.story_ids,
                "recall_count": len(m.recalls),
            },
            "results": results,
            "condition_averages": averages,
            "isc": {"per_story": isc_entries, "per_participant": isc_means} if isc_entries else None,
            "group_summary": self.group_summary(averages, isc_means),
        }

    def write_partial(self, exc: BaseException) -> None:
        partial = self.out / "partial"
        done = sorted(
            {(e["mode"], e["segment_count"], e["participant_id"], e["story_id"]) for e in self.results}
        )
        write_json(partial / "results.json", {"schema_version": SCHEMA_VERSION, "results": self.results})
        write_json(
            partial / "RESUME.json",
            {
                "error": f"{type(exc).__name__}: {exc}",
                "completed_units": [list(k) for k in done],
                "hint": "rerun the same command; cached provider results are reused",
            },
        )


def run(
    manifest: StudyManifest,
    out_dir: str | Path,
    *,
    embedder: Embedder | None = None,
    chat_provider: ChatProvider | None = None,
) -> dict:
    """Score a whole study and write ``report.json`` plus matrix dumps to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = manifest.analysis
    embedder = embedder or Embedder(cfg.embedding)
    if chat_provider is None and "rating" in cfg.modes:
        chat_provider = make_chat_provider(cfg.rater)
    state = _Run(manifest, out, embedder, chat_provider)
    try:
        state.execute()
    except Exception as exc:
        logger.error("run failed, writing partial results: %s", exc)
        state.write_partial(exc)
        raise
    report = to_jsonable(state.report())
    write_json(out / REPORT_NAME, report)
    if (out / "partial").exists():
        shutil.rmtree(out / "partial")
    return report
