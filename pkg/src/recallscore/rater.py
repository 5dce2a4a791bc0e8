"""Prompt-based similarity ratings of story/recall segment pairs.

A chat provider is anything with ``complete(messages, temperature)`` that
returns the reply text (or a :class:`ChatReply`). Three ship here:

* :class:`RemoteChatProvider` - JSON POST ``{model, temperature, messages}``
  answered by ``{content}``.
* :class:`StubChatProvider` - offline, rates by word overlap.
* :class:`ScriptedChatProvider` - replays canned replies for tests.
"""

from __future__ import annotations

import csv
import logging
import os
import re
import threading
import time
import unicodedata
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Protocol, Sequence

import httpx
import numpy as np

from .embedding import normalize_word
from .errors import ProviderUnavailable, UnparseableReply, WordSequenceChanged
from .matrix import SimilarityMatrix

logger = logging.getLogger(__name__)

CHAT_TOKEN_ENV = "RECALLSCORE_CHAT_TOKEN"

RATING_PROMPT = (
    "Act as an expert rater of speech contents. On a scale from 0-100, rate the degree to "
    "which a text segment from a story is semantically captured by the text segment from a "
    'human who recalled the story. 0 refers to "not very" and 100 refers to "very". If the '
    "recall segment mostly does not capture the story segment, give a 0. If the recall "
    "segment mostly captures the story segment, give a 100. This is the text segment from "
    "the story: '{story}'. This is the text segment from the human recall: '{recall}'. "
    "Please provide only the rating score and nothing else. Use the full range of the scale."
)

PUNCTUATION_PROMPT = (
    "The following text has no or minimal punctuation. Please repair missing punctuation "
    "where it seems appropriate. Use only periods, commas, and question marks. Avoid all "
    "other punctuation. Be moderate and do not overdo it. Do not add, replace, or remove any "
    "words from the text. Do not insert line breaks. Add punctuation, but otherwise reproduce "
    "the text exactly. This is the text for which punctuation needs to be repaired: "
)

_RATING_SLOTS = re.compile(
    r"from the story: '(?P<story>.*)'\. This is the text segment from the human recall: "
    r"'(?P<recall>.*)'\. Please provide only",
    re.DOTALL,
)
_DIGITS = re.compile(r"\d+")


@dataclass(frozen=True)
class ChatReply:
    content: str
    tokens: int | None = None


class ChatProvider(Protocol):
    def complete(self, messages: list[dict[str, str]], temperature: float = 0.0) -> str | ChatReply:
        ...


@dataclass(frozen=True)
class RaterConfig:
    kind: str = "stub"
    endpoint: str | None = None
    model_id: str = "gpt-4o-mini-2024-07-18"
    temperature: float = 0.0
    replicate_count: int = 3
    parse_retry_limit: int = 3
    retry_limit: int = 3
    max_in_flight: int = 4
    diagonal_only: bool = False
    request_log: str | None = None
    timeout: float = 60.0
    token_env: str = CHAT_TOKEN_ENV

    def __post_init__(self):
        if self.kind not in ("stub", "remote"):
            raise ValueError(f"unknown rater provider kind {self.kind!r}")
        if self.replicate_count < 1:
            raise ValueError("replicate_count must be >= 1")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote rater needs an endpoint")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RaterConfig":
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass(frozen=True)
class RatingCell:
    story_idx: int
    recall_idx: int
    replicates: tuple[int, ...]

    @property
    def value(self) -> float:
        return sum(self.replicates) / len(self.replicates) / 100.0


# --------------------------------------------------------------------------
# prompts and parsing


def build_prompt(story_seg: str, recall_seg: str) -> str:
    if not story_seg or not story_seg.strip():
        raise ValueError("story segment is empty")
    if not recall_seg or not recall_seg.strip():
        raise ValueError("recall segment is empty")
    # str.format would choke on braces inside the segments
    head, rest = RATING_PROMPT.split("{story}")
    middle, tail = rest.split("{recall}")
    return f"{head}{story_seg}{middle}{recall_seg}{tail}"


def parse_rating(reply: str) -> int:
    """First run of digits in the reply, accepted if it lies in 0..100."""
    match = _DIGITS.search(reply or "")
    if match is None:
        raise UnparseableReply(reply)
    value = int(match.group())
    if value > 100:
        raise UnparseableReply(reply)
    return value


def _content(reply: str | ChatReply) -> tuple[str, int | None]:
    if isinstance(reply, ChatReply):
        return reply.content, reply.tokens
    return reply, None


# --------------------------------------------------------------------------
# providers


class RemoteChatProvider:
    def __init__(self, cfg: RaterConfig, client: httpx.Client | None = None):
        self.cfg = cfg
        self._client = client or httpx.Client(timeout=cfg.timeout)
        token = os.environ.get(cfg.token_env)
        self._headers = {"Authorization": f"Bearer {token}"} if token else {}

    def complete(self, messages, temperature=0.0) -> ChatReply:
        last_exc: Exception | None = None
        for attempt in range(self.cfg.retry_limit):
            if attempt:
                time.sleep(min(0.1 * 2 ** (attempt - 1), 5.0))
            try:
                resp = self._client.post(
                    self.cfg.endpoint,
                    json={"model": self.cfg.model_id, "temperature": temperature, "messages": messages},
                    headers=self._headers,
                )
                resp.raise_for_status()
                body = resp.json()
                content = body["content"]
            except (httpx.HTTPError, KeyError, ValueError, TypeError) as exc:
                last_exc = exc
                logger.warning("chat request failed (attempt %d): %s", attempt + 1, exc)
                continue
            usage = body.get("usage") or {}
            return ChatReply(str(content), usage.get("total_tokens"))
        raise ProviderUnavailable(
            f"chat endpoint {self.cfg.endpoint} failed {self.cfg.retry_limit} times: {last_exc}"
        )


class StubChatProvider:
    """Offline stand-in: rating = share of story words found in the recall segment.

    Punctuation-repair prompts are answered by echoing the text back.
    """

    def __init__(self):
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, messages, temperature=0.0) -> str:
        with self._lock:
            self.calls += 1
        prompt = messages[-1]["content"]
        if prompt.startswith(PUNCTUATION_PROMPT):
            return prompt[len(PUNCTUATION_PROMPT) :]
        match = _RATING_SLOTS.search(prompt)
        if match is None:
            return "0"
        story = {normalize_word(w) for w in match["story"].split()}
        recall = {normalize_word(w) for w in match["recall"].split()}
        if not story:
            return "0"
        return str(round(100 * len(story & recall) / len(story)))


class ScriptedChatProvider:
    """Replays replies from a list (cycled) or a ``script(prompt, k)`` callable.

    ``k`` counts how many times the same prompt has been seen so far, which
    keeps replies deterministic per prompt even under concurrent requests
    (up to replicate order, which cannot change a mean).
    """

    def __init__(self, script: Sequence[str] | Callable[[str, int], str]):
        self._script = script
        self._lock = threading.Lock()
        self._seen: dict[str, int] = {}
        self.prompts: list[str] = []

    @property
    def calls(self) -> int:
        return len(self.prompts)

    def complete(self, messages, temperature=0.0) -> str:
        prompt = messages[-1]["content"]
        with self._lock:
            k = self._seen.get(prompt, 0)
            self._seen[prompt] = k + 1
            i = len(self.prompts)
            self.prompts.append(prompt)
        if callable(self._script):
            return self._script(prompt, k)
        return self._script[i % len(self._script)]


def make_chat_provider(cfg: RaterConfig, client: httpx.Client | None = None) -> ChatProvider:
    if cfg.kind == "remote":
        return RemoteChatProvider(cfg, client)
    return StubChatProvider()


# --------------------------------------------------------------------------
# rating


class _RequestLog:
    def __init__(self, path: str | None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if not self.path.exists():
                self.path.write_text("timestamp,row,col,replicate,attempt,tokens\n")

    def record(self, cell, replicate, attempt, tokens):
        if self.path is None:
            return
        stamp = datetime.now(timezone.utc).isoformat(timespec="milliseconds")
        with self._lock, self.path.open("a", newline="") as fh:
            csv.writer(fh).writerow([stamp, cell[0], cell[1], replicate, attempt, "" if tokens is None else tokens])


def _ask(provider, prompt, cfg: RaterConfig, cell, replicate, log: _RequestLog) -> int:
    messages = [{"role": "user", "content": prompt}]
    reply = ""
    for attempt in range(cfg.parse_retry_limit + 1):
        reply, tokens = _content(provider.complete(messages, temperature=cfg.temperature))
        log.record(cell, replicate, attempt, tokens)
        try:
            return parse_rating(reply)
        except UnparseableReply:
            logger.info("unparseable rating %r for cell %s, re-asking", reply, cell)
    raise UnparseableReply(reply, cell=cell)


def rate_cells(
    story_segs: Sequence[str],
    recall_segs: Sequence[str],
    cfg: RaterConfig,
    provider: ChatProvider | None = None,
) -> list[RatingCell]:
    """Rate every requested (story, recall) pair ``replicate_count`` times."""
    if not story_segs or not recall_segs:
        raise ValueError("segment lists must be non-empty")
    if cfg.diagonal_only:
        if len(story_segs) != len(recall_segs):
            raise ValueError("diagonal-only rating needs equally many story and recall segments")
        cells = [(i, i) for i in range(len(story_segs))]
    else:
        cells = [(i, j) for i in range(len(story_segs)) for j in range(len(recall_segs))]
    # validate every prompt before the first request goes out
    prompts = {c: build_prompt(story_segs[c[0]], recall_segs[c[1]]) for c in cells}
    provider = provider or make_chat_provider(cfg)
    log = _RequestLog(cfg.request_log)

    jobs = [(c, r) for c in cells for r in range(cfg.replicate_count)]

    def run(job):
        (i, j), r = job
        return _ask(provider, prompts[(i, j)], cfg, (i + 1, j + 1), r, log)

    with ThreadPoolExecutor(max_workers=cfg.max_in_flight) as pool:
        scores = list(pool.map(run, jobs))

    by_cell: dict[tuple[int, int], list[int]] = {}
    for ((i, j), _), score in zip(jobs, scores):
        by_cell.setdefault((i, j), []).append(score)
    return [RatingCell(i + 1, j + 1, tuple(by_cell[(i, j)])) for i, j in cells]


def rate_matrix(
    story_segs: Sequence[str],
    recall_segs: Sequence[str],
    cfg: RaterConfig,
    provider: ChatProvider | None = None,
    row_label: str = "",
    col_label: str = "",
) -> SimilarityMatrix:
    """Rating-mode similarity matrix; uncomputed cells are NaN."""
    cells = rate_cells(story_segs, recall_segs, cfg, provider)
    values = np.full((len(story_segs), len(recall_segs)), np.nan)
    for cell in cells:
        values[cell.story_idx - 1, cell.recall_idx - 1] = cell.value
    return SimilarityMatrix(values, "rating", row_label, col_label)


# --------------------------------------------------------------------------
# punctuation repair


def word_sequence(text: str) -> list[str]:
    """Lowercased words with all punctuation characters removed."""
    stripped = "".join(" " if unicodedata.category(ch).startswith("P") else ch for ch in text)
    return stripped.casefold().split()


def repair_punctuation(
    transcript: str,
    provider: ChatProvider,
    *,
    strict: bool = False,
    temperature: float = 0.0,
) -> str:
    """Ask the provider to restore punctuation and check no words were changed.

    A changed word sequence triggers a warning, or :class:`WordSequenceChanged`
    when ``strict`` is set.
    """
    if not transcript or not transcript.strip():
        raise ValueError("transcript is empty")
    messages = [{"role": "user", "content": PUNCTUATION_PROMPT + transcript}]
    repaired, _ = _content(provider.complete(messages, temperature=temperature))
    if word_sequence(repaired) != word_sequence(transcript):
        msg = "punctuation repair changed the word sequence"
        if strict:
            raise WordSequenceChanged(msg)
        warnings.warn(msg, stacklevel=2)
    return repaired
