from __future__ import annotations

import math
from importlib import resources
from pathlib import Path

import pytest

from recallscore.embedding import Embedder, ProviderConfig

TOY_MANIFEST = Path(str(resources.files("recallscore").joinpath("data/toy/manifest.json")))
GOLDEN_DIR = Path(__file__).parent / "golden"


def brute_ranks(xs):
    """Rank table by counting: 1 + #smaller + (#ties - 1) / 2."""
    return [1 + sum(y < x for y in xs) + (sum(y == x for y in xs) - 1) / 2 for x in xs]


def brute_pearson(a, b):
    ma = math.fsum(a) / len(a)
    mb = math.fsum(b) / len(b)
    cov = math.fsum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = math.fsum((x - ma) ** 2 for x in a)
    vb = math.fsum((y - mb) ** 2 for y in b)
    return cov / math.sqrt(va * vb)


def brute_spearman(x, y):
    return brute_pearson(brute_ranks(list(x)), brute_ranks(list(y)))


@pytest.fixture
def toy_manifest_path() -> Path:
    return TOY_MANIFEST


@pytest.fixture
def stub_embedder() -> Embedder:
    return Embedder(ProviderConfig(kind="stub", dim=768, seed=0))


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
