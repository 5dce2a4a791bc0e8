"""Seeded synthetic stories and recalls for offline testing.

Stories are built from pseudo-words: a small pool of shared function words
plus a content vocabulary unique to each story. A recall keeps most story
sentences in order, drops and substitutes some words, and occasionally
swaps neighbouring sentences. Nothing here is meant to look like real
language; it only needs to give bag-of-words embeddings something to find.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_ONSETS = "b c d f g h j k l m n p r s t v w z br dr kl pr st tr sk".split()
_VOWELS = "a e i o u ai ou ee".split()
_CODAS = ["", "", "n", "r", "s", "l", "m", "k", "st"]


def _pseudo_word(rng: np.random.Generator) -> str:
    syllables = rng.integers(1, 4)
    return "".join(
        _ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))] + _CODAS[rng.integers(len(_CODAS))]
        for _ in range(syllables)
    )


def vocabulary(rng: np.random.Generator, size: int, exclude: set[str] = frozenset()) -> list[str]:
    words: list[str] = []
    seen = set(exclude)
    while len(words) < size:
        w = _pseudo_word(rng)
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def oov_words(count: int, seed: int) -> list[str]:
    """Words guaranteed to share nothing with the pseudo-word alphabet above."""
    rng = np.random.default_rng([seed, 7919])
    return [f"qx{int(rng.integers(10**9)):09d}" for _ in range(count)]


@dataclass
class SyntheticStory:
    story_id: str
    sentences: list[list[str]]

    @property
    def text(self) -> str:
        return " ".join(" ".join(s) + "." for s in self.sentences)


@dataclass
class SyntheticCorpus:
    stories: list[SyntheticStory]
    participants: list[dict]
    recalls: list[dict] = field(default_factory=list)

    def manifest(self, **analysis) -> dict:
        """Manifest dict with inline texts (no files needed)."""
        return {
            "schema_version": 1,
            "stories": [{"story_id": s.story_id, "language": "xx", "text": s.text} for s in self.stories],
            "participants": copy.deepcopy(self.participants),
            "recalls": copy.deepcopy(self.recalls),
            "analysis": analysis,
        }

    def write(self, directory: str | Path, **analysis) -> Path:
        """Write texts and a file-based manifest; returns the manifest path."""
        directory = Path(directory)
        (directory / "stories").mkdir(parents=True, exist_ok=True)
        (directory / "recalls").mkdir(parents=True, exist_ok=True)
        data = self.manifest(**analysis)
        for story in data["stories"]:
            rel = f"stories/{story['story_id']}.txt"
            (directory / rel).write_text(story.pop("text") + "\n", encoding="utf-8")
            story["text_path"] = rel
        for rec in data["recalls"]:
            rel = f"recalls/{rec['participant_id']}_{rec['story_id']}.txt"
            (directory / rel).write_text(rec.pop("transcript") + "\n", encoding="utf-8")
            rec["transcript_path"] = rel
        path = directory / "manifest.json"
        path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
        return path


def make_story(
    story_id: str,
    rng: np.random.Generator,
    function_words: list[str],
    content_words: list[str],
    n_words: int = 320,
) -> SyntheticStory:
    # Zipf-like preference over content words
    weights = 1.0 / np.arange(1, len(content_words) + 1) ** 0.6
    weights /= weights.sum()
    sentences, total = [], 0
    while total < n_words:
        length = int(rng.integers(8, 15))
        words = [
            function_words[rng.integers(len(function_words))]
            if rng.random() < 0.3
            else content_words[rng.choice(len(content_words), p=weights)]
            for _ in range(length)
        ]
        sentences.append(words)
        total += length
    return SyntheticStory(story_id, sentences)


def make_recall(
    story: SyntheticStory,
    rng: np.random.Generator,
    fillers: list[str],
    keep_sentence: float = 0.75,
    keep_word: float = 0.8,
    substitute: float = 0.1,
    swap: float = 0.1,
) -> str:
    kept = [s for s in story.sentences if rng.random() < keep_sentence] or story.sentences[:1]
    for i in range(len(kept) - 1):
        if rng.random() < swap:
            kept[i], kept[i + 1] = kept[i + 1], kept[i]
    out = []
    for sentence in kept:
        words = []
        for w in sentence:
            if rng.random() >= keep_word:
                continue
            words.append(fillers[rng.integers(len(fillers))] if rng.random() < substitute else w)
        if words:
            out.append(" ".join(words) + ".")
    return " ".join(out)


def make_corpus(
    seed: int = 0,
    n_stories: int = 6,
    n_participants: int = 4,
    story_words: int = 320,
    min_recall_words: int = 60,
) -> SyntheticCorpus:
    """Every participant recalls every story; conditions alternate and counterbalance.

    Participants alternate between the ``english`` and ``non_english`` groups.
    """
    rng = np.random.default_rng(seed)
    function_words = vocabulary(rng, 20)
    used = set(function_words)
    stories = []
    for s in range(n_stories):
        content = vocabulary(rng, 120, exclude=used)
        used.update(content)
        stories.append(make_story(f"story{s + 1}", rng, function_words, content, story_words))

    participants, recalls = [], []
    for p in range(n_participants):
        pid = f"p{p + 1:02d}"
        participants.append(
            {"participant_id": pid, "group": "english" if p % 2 == 0 else "non_english", "language": "xx"}
        )
        fillers = vocabulary(rng, 30, exclude=used)
        used.update(fillers)
        for s, story in enumerate(stories):
            # first half clear / second half babble, flipped for every other pair
            clear = (s < n_stories // 2) != bool((p // 2) % 2)
            text = make_recall(story, rng, fillers)
            while len(text.split()) < min_recall_words:
                text = text + " " + make_recall(story, rng, fillers)
            recalls.append(
                {
                    "participant_id": pid,
                    "story_id": story.story_id,
                    "condition": "clear" if clear else "babble",
                    "transcript": text,
                }
            )
    return SyntheticCorpus(stories, participants, recalls)


def replace_segments(segments: list[str], positions, seed: int) -> list[str]:
    """Swap the segments at ``positions`` for same-length out-of-vocabulary text."""
    out = list(segments)
    for k, pos in enumerate(positions):
        out[pos] = " ".join(oov_words(len(out[pos].split()), seed * 1000 + k))
    return out
