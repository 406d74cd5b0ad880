"""Exception hierarchy shared across the package."""

from __future__ import annotations


class OntoforgeError(Exception):
    """Base class for all errors raised by this package."""


class InvalidLabel(OntoforgeError):
    """Label is empty after sanitization and cannot yield a symbol."""


class DuplicateCurie(OntoforgeError):
    """A CURIE was registered twice in the same symbol table."""


class ParseError(OntoforgeError):
    """Input text is malformed. Carries the 1-based line number when known."""

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(message if line_no is None else f"line {line_no}: {message}")
        self.line_no = line_no


class SchemaError(OntoforgeError):
    """Input parsed but required fields are missing or of the wrong shape."""

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(message if line_no is None else f"line {line_no}: {message}")
        self.line_no = line_no


class FetchError(OntoforgeError):
    """Remote fetch failed. Carries the HTTP status when available."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class EmbedError(OntoforgeError):
    """Embedding provider failed. ``index`` is the first failing batch position."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class DimMismatch(OntoforgeError):
    """Vector dimensionality differs from the collection dimensionality."""


class DuplicateKey(OntoforgeError):
    """Two collection items share a key."""


class StoreIOError(OntoforgeError):
    """A collection file is unreadable, truncated, or has a bad magic header."""


class VersionMismatch(OntoforgeError):
    """A collection file was written by an incompatible format version."""


class EmptyStore(OntoforgeError):
    """Retrieval was attempted against an empty collection."""


class BudgetImpossible(OntoforgeError):
    """The prompt cannot fit within the token budget even at the example floor."""


class ProviderError(OntoforgeError):
    """Completion provider failed after retries."""


class ScriptMiss(OntoforgeError):
    """Scripted provider has no canned response for the requested key."""

    def __init__(self, key: str):
        super().__init__(f"no scripted response for key {key!r}")
        self.key = key


class NoJsonFound(OntoforgeError):
    """Completion response contains no JSON object. Carries the raw text."""

    def __init__(self, raw: str):
        super().__init__("no JSON object found in completion response")
        self.raw = raw


class MalformedJson(OntoforgeError):
    """Completion response contains a JSON-like block that does not parse."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class MissingGoldField(OntoforgeError):
    """A term lacks the gold field required by the masking task."""


class InsufficientNewTerms(OntoforgeError):
    """Fewer terms past the cutoff date than the requested test-set size."""

    def __init__(self, available: int, requested: int):
        super().__init__(
            f"only {available} terms past the cutoff, {requested} requested"
        )
        self.available = available
        self.requested = requested


class MalformedGold(OntoforgeError):
    """Gold logical definition does not have genus-differentia shape."""


class UnknownRowId(OntoforgeError):
    """An evaluation sheet row id is absent from the blind key."""


class ScoreOutOfRange(OntoforgeError):
    """An evaluation score is outside the 1..5 ordinal scale."""
