"""Study manifest loading and validation."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .embedding import ProviderConfig
from .errors import ManifestError, RecallScoreError
from .rater import RaterConfig
from .segmenter import segment_ranges, tokenize

CONDITIONS = ("clear", "babble")
GROUPS = ("english", "non_english")


def load_schema() -> dict:
    text = resources.files("recallscore").joinpath("data/manifest.schema.json").read_text("utf-8")
    return json.loads(text)


@dataclass
class AnalysisConfig:
    segment_counts: list[int] = field(default_factory=lambda: [10])
    overlap: float = 0.2
    mode: str = "embedding"
    chance: bool = True
    rating_chance: bool = False
    isc: bool = True
    isc_dumps: bool = False
    diagonal_only: bool = False
    require_balanced: bool = True
    seed: int = 0
    workers: int = 4
    embedding: ProviderConfig = field(default_factory=ProviderConfig)
    rater: RaterConfig = field(default_factory=RaterConfig)

    @property
    def modes(self) -> list[str]:
        return ["embedding", "rating"] if self.mode == "both" else [self.mode]

    def echo(self) -> dict:
        """Config as recorded in reports; machine-local paths are left out."""
        out = {k: v for k, v in asdict(self).items() if k not in ("embedding", "rater", "workers")}
        out["segment_counts"] = list(self.segment_counts)
        emb = asdict(self.embedding)
        rat = asdict(self.rater)
        for d, drop in ((emb, ("cache_dir", "token_env", "timeout")), (rat, ("request_log", "token_env", "timeout"))):
            for k in drop:
                d.pop(k, None)
        out["providers"] = {"embedding": emb, "rater": rat}
        return out


@dataclass(frozen=True)
class Participant:
    participant_id: str
    group: str
    language: str


@dataclass(frozen=True)
class Recall:
    participant_id: str
    story_id: str
    condition: str
    transcript: str


@dataclass
class StudyManifest:
    stories: dict[tuple[str, str], str]
    participants: dict[str, Participant]
    recalls: list[Recall]
    analysis: AnalysisConfig
    base_dir: Path = Path(".")

    @property
    def story_ids(self) -> list[str]:
        return sorted({sid for sid, _ in self.stories})

    def story_text(self, story_id: str, language: str) -> str:
        return self.stories[(story_id, language)]

    def recalls_of(self, participant_id: str) -> list[Recall]:
        return [r for r in self.recalls if r.participant_id == participant_id]


def _read(base: Path, rel: str) -> str:
    return (base / rel).read_text(encoding="utf-8")


def analysis_from_dict(data: dict[str, Any]) -> AnalysisConfig:
    data = dict(data)
    providers = data.pop("providers", None) or {}
    cfg = AnalysisConfig(**{k: v for k, v in data.items() if k in AnalysisConfig.__dataclass_fields__})
    emb = dict(providers.get("embedding") or {})
    emb.setdefault("seed", cfg.seed)
    cfg.embedding = ProviderConfig.from_dict(emb)
    rat = dict(providers.get("rater") or {})
    rat.setdefault("diagonal_only", cfg.diagonal_only)
    cfg.rater = RaterConfig.from_dict(rat)
    cfg.segment_counts = sorted(set(int(n) for n in cfg.segment_counts))
    return cfg


def parse_manifest(
    data: dict, base_dir: str | Path = ".", overrides: dict[str, Any] | None = None
) -> StudyManifest:
    """Validate a manifest dict and resolve all texts.

    ``overrides`` replaces entries of the ``analysis`` block (CLI flags).
    Raises :class:`ManifestError` listing every problem with its JSON pointer.
    """
    base = Path(base_dir)
    if overrides:
        data = {**data, "analysis": {**(data.get("analysis") or {}), **overrides}}
    problems: list[tuple[str, str]] = []
    validator = jsonschema.Draft202012Validator(load_schema())
    for err in sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path))):
        pointer = "".join(f"/{p}" for p in err.absolute_path)
        problems.append((pointer, err.message))
    if problems:
        raise ManifestError(problems)

    try:
        analysis = analysis_from_dict(data.get("analysis") or {})
    except (TypeError, ValueError) as exc:
        raise ManifestError([("/analysis", str(exc))]) from exc

    stories: dict[tuple[str, str], str] = {}
    for i, s in enumerate(data["stories"]):
        key = (s["story_id"], s["language"])
        if key in stories:
            problems.append((f"/stories/{i}", f"duplicate story {key[0]!r} in language {key[1]!r}"))
            continue
        try:
            stories[key] = s["text"] if "text" in s else _read(base, s["text_path"])
        except OSError as exc:
            problems.append((f"/stories/{i}/text_path", f"cannot read story text: {exc}"))

    participants: dict[str, Participant] = {}
    for i, p in enumerate(data["participants"]):
        if p["participant_id"] in participants:
            problems.append((f"/participants/{i}/participant_id", f"duplicate participant {p['participant_id']!r}"))
            continue
        participants[p["participant_id"]] = Participant(p["participant_id"], p["group"], p["language"])

    story_ids = {sid for sid, _ in stories}
    recalls: list[Recall] = []
    seen_pairs: set[tuple[str, str]] = set()
    recall_texts: dict[int, str] = {}
    for i, r in enumerate(data["recalls"]):
        pid, sid = r["participant_id"], r["story_id"]
        ok = True
        if pid not in participants:
            problems.append((f"/recalls/{i}/participant_id", f"unknown participant {pid!r}"))
            ok = False
        if sid not in story_ids:
            problems.append((f"/recalls/{i}/story_id", f"unknown story {sid!r}"))
            ok = False
        elif pid in participants and (sid, participants[pid].language) not in stories:
            problems.append(
                (f"/recalls/{i}/story_id", f"story {sid!r} has no text in language {participants[pid].language!r}")
            )
            ok = False
        if (pid, sid) in seen_pairs:
            problems.append((f"/recalls/{i}", f"participant {pid!r} recalls story {sid!r} more than once"))
            ok = False
        seen_pairs.add((pid, sid))
        try:
            text = r["transcript"] if "transcript" in r else _read(base, r["transcript_path"])
        except OSError as exc:
            problems.append((f"/recalls/{i}/transcript_path", f"cannot read transcript: {exc}"))
            continue
        recall_texts[i] = text
        if ok:
            recalls.append(Recall(pid, sid, r["condition"], text))

    # design checks
    for i, p in enumerate(data["participants"]):
        pid = p["participant_id"]
        own = [r for r in recalls if r.participant_id == pid]
        counts = Counter(r.condition for r in own)
        if analysis.require_balanced and own and counts["clear"] != counts["babble"]:
            problems.append(
                (f"/participants/{i}", f"unbalanced conditions: {counts['clear']} clear vs {counts['babble']} babble")
            )
        if analysis.chance and len(own) == 1:
            problems.append((f"/participants/{i}", "chance controls need at least two recalls per participant"))

    # every text must segment at every requested count
    texts = [(f"/stories/{i}", stories.get((s["story_id"], s["language"]))) for i, s in enumerate(data["stories"])]
    texts += [(f"/recalls/{i}", t) for i, t in sorted(recall_texts.items())]
    for pointer, text in texts:
        if text is None:
            continue
        try:
            words = tokenize(text).word_count
            for n in analysis.segment_counts:
                segment_ranges(words, n, analysis.overlap)
        except RecallScoreError as exc:
            problems.append((pointer, str(exc)))

    if problems:
        raise ManifestError(problems)
    return StudyManifest(stories, participants, recalls, analysis, base)


def validate_manifest(path: str | Path, overrides: dict[str, Any] | None = None) -> StudyManifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifestError([("", f"cannot read manifest: {exc}")]) from exc
    except json.JSONDecodeError as exc:
        raise ManifestError([("", f"manifest is not valid JSON: {exc}")]) from exc
    return parse_manifest(data, path.parent, overrides)
