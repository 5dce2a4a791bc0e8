"""Exception hierarchy shared across the package."""

from __future__ import annotations


class RecallScoreError(Exception):
    """Base class for all package errors."""


# segmentation
class EmptyText(RecallScoreError, ValueError):
    pass


class TooFewWords(RecallScoreError, ValueError):
    pass


class BadParams(RecallScoreError, ValueError):
    pass


# providers
class ProviderUnavailable(RecallScoreError):
    """A remote backend kept failing after the configured number of attempts."""


class DimMismatch(RecallScoreError):
    pass


class UnparseableReply(RecallScoreError):
    def __init__(self, reply: str, cell: tuple[int, int] | None = None):
        self.reply = reply
        self.cell = cell
        where = f" at cell {cell}" if cell is not None else ""
        super().__init__(f"could not parse a 0-100 rating from reply {reply!r}{where}")


class WordSequenceChanged(RecallScoreError):
    pass


# numerics
class ConstantVector(RecallScoreError, ValueError):
    def __init__(self, message: str = "input vector has zero rank variance", cell=None):
        self.cell = cell
        if cell is not None:
            message = f"{message} (row {cell[0]}, col {cell[1]})"
        super().__init__(message)


class BadN(RecallScoreError, ValueError):
    pass


class NoControls(RecallScoreError, ValueError):
    pass


class MissingLabel(RecallScoreError, KeyError):
    pass


class IncomparablePair(RecallScoreError, ValueError):
    pass


class NoPeers(RecallScoreError, ValueError):
    pass


# pipeline
class ManifestError(RecallScoreError):
    """Manifest failed validation; ``problems`` holds (json_pointer, message) pairs."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        lines = [f"{ptr or '/'}: {msg}" for ptr, msg in problems]
        super().__init__("invalid manifest:\n  " + "\n  ".join(lines))


class SchemaMismatch(RecallScoreError):
    pass
