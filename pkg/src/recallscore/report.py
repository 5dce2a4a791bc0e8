"""Report loading and regression diffs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

from .errors import SchemaMismatch


@dataclass(frozen=True)
class Difference:
    path: str
    a: Any
    b: Any

    @property
    def delta(self) -> float | None:
        if _is_number(self.a) and _is_number(self.b):
            return abs(self.a - self.b)
        return None

    def __str__(self) -> str:
        extra = f" (|delta|={self.delta:.3g})" if self.delta is not None else ""
        return f"{self.path}: {self.a!r} != {self.b!r}{extra}"


def load_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _walk(a, b, path: str, tol: float) -> Iterator[Difference]:
    if isinstance(a, dict) and isinstance(b, dict):
        for key in sorted(set(a) | set(b)):
            sub = f"{path}/{key}"
            if key not in a or key not in b:
                yield Difference(sub, a.get(key, "<missing>"), b.get(key, "<missing>"))
            else:
                yield from _walk(a[key], b[key], sub, tol)
    elif isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            yield Difference(f"{path}/length", len(a), len(b))
        for i, (x, y) in enumerate(zip(a, b)):
            yield from _walk(x, y, f"{path}/{i}", tol)
    elif _is_number(a) and _is_number(b):
        if not math.isclose(a, b, rel_tol=0.0, abs_tol=tol) and a != b:
            yield Difference(path, a, b)
    elif a != b:
        yield Difference(path, a, b)


def diff_reports(a: dict, b: dict, tolerance: float = 0.0) -> list[Difference]:
    """Fieldwise differences larger than ``tolerance`` (absolute) between two reports."""
    va, vb = a.get("schema_version"), b.get("schema_version")
    if va != vb:
        raise SchemaMismatch(f"schema_version {va!r} vs {vb!r}")
    return list(_walk(a, b, "", tolerance))
