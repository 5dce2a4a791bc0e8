"""Split documents into N equally sized, overlapping word windows.

Window length ``L`` is chosen so that ``n`` windows with overlap fraction
``f`` exactly tile ``W`` words::

    L = W / (1 + (n - 1) * (1 - f))
    stride = L * (1 - f)

Start/end positions are floored; the last window always ends at ``W``.
All arithmetic is done with :class:`fractions.Fraction` so the result does
not depend on float rounding of values like ``0.2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import BadParams, EmptyText, TooFewWords


@dataclass(frozen=True)
class TokenizedText:
    tokens: tuple[str, ...]

    @property
    def word_count(self) -> int:
        return len(self.tokens)

    def join(self, start: int = 0, stop: int | None = None) -> str:
        return " ".join(self.tokens[start:stop])


@dataclass(frozen=True)
class SegmentedText:
    text: TokenizedText
    ranges: tuple[tuple[int, int], ...]
    segment_count: int
    overlap: float

    def __len__(self) -> int:
        return len(self.ranges)

    @property
    def segments(self) -> list[str]:
        """Segment strings, words re-joined with single spaces."""
        return [self.text.join(a, b) for a, b in self.ranges]


def tokenize(text: str) -> TokenizedText:
    """Split on Unicode whitespace; punctuation stays attached to words."""
    tokens = tuple(text.split())
    if not tokens:
        raise EmptyText("text contains no words")
    return TokenizedText(tokens)


def _exact(value: float) -> Fraction:
    # repr() gives the shortest decimal that round-trips, so 0.2 -> 1/5
    return Fraction(repr(float(value)))


def segment_ranges(word_count: int, n: int, overlap: float = 0.2) -> list[tuple[int, int]]:
    """Half-open ``[start, end)`` word-index ranges for ``n`` overlapping windows."""
    if isinstance(n, bool) or not isinstance(n, int) or n < 2:
        raise BadParams(f"segment count must be an integer >= 2, got {n!r}")
    if not (0 <= overlap < 1) or math.isnan(overlap):
        raise BadParams(f"overlap fraction must lie in [0, 1), got {overlap!r}")
    if word_count < 2 * n:
        raise TooFewWords(f"{word_count} words cannot form {n} segments (need at least {2 * n})")

    f = _exact(overlap)
    length = Fraction(word_count) / (1 + (n - 1) * (1 - f))
    stride = length * (1 - f)
    if stride < 1:
        # windows would share a start index
        raise TooFewWords(
            f"{word_count} words give a stride below one word for n={n}, overlap={overlap}"
        )

    ranges = []
    for i in range(n):
        start = math.floor(i * stride)
        end = word_count if i == n - 1 else math.floor(i * stride + length)
        ranges.append((start, end))
    return ranges


def segment(text: TokenizedText | str, n: int, overlap: float = 0.2) -> SegmentedText:
    if isinstance(text, str):
        text = tokenize(text)
    ranges = segment_ranges(text.word_count, n, overlap)
    return SegmentedText(text=text, ranges=tuple(ranges), segment_count=n, overlap=overlap)
