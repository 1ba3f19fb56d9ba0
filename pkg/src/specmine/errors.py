"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class SpecmineError(Exception):
    """Base class for all errors raised by this package."""


class IoError(SpecmineError):
    """A source file is missing or unreadable."""


class EncodingError(SpecmineError):
    """A source file is not valid UTF-8."""


class ConfigError(SpecmineError):
    """A configuration value violates its precondition."""


class RangeError(SpecmineError):
    """A requested line range falls outside the document."""


class ProviderError(SpecmineError):
    """Transport or HTTP failure while talking to the model provider."""


class AuthError(SpecmineError):
    """A live model call was requested but no credential is configured."""


class CassetteMiss(SpecmineError):
    """Replay mode found no unconsumed exchange for a request fingerprint."""

    def __init__(self, fingerprint: str, message: str | None = None) -> None:
        super().__init__(message or f"no recorded exchange for fingerprint {fingerprint}")
        self.fingerprint = fingerprint


class MissingBinding(SpecmineError):
    """A prompt template placeholder was left unbound."""


class BudgetExhausted(SpecmineError):
    """The repair loop ran out of retries.

    Carries the final validator error and the conversation transcript so
    callers can persist or report what was attempted.
    """

    def __init__(self, message: str, *, last_error: str = "", transcript=None, last_envelope=None) -> None:
        super().__init__(message)
        self.last_error = last_error
        self.transcript = list(transcript or [])
        self.last_envelope = last_envelope


class NoPrimaryPredicate(SpecmineError):
    """Grammar instantiation needs at least one primary predicate."""


class DuplicatePredicateName(SpecmineError):
    """Two predicates with the same name reached grammar instantiation."""


class ParseError(SpecmineError):
    """A candidate DSL statement does not derive from the grammar.

    ``position`` is a 0-based character offset into the statement text and
    ``expected`` names the token kinds that would have been accepted there.
    """

    def __init__(self, message: str, *, position: int = 0, expected: tuple[str, ...] = ()) -> None:
        super().__init__(message)
        self.position = position
        self.expected = expected


class PathError(SpecmineError):
    """A TargetAttr selector is not a syntactically valid JSONPath."""


class GoldMismatch(SpecmineError):
    """A gold annotation file references a different document."""


class EmptyInput(SpecmineError):
    """An aggregate was requested over zero reports."""


class MissingArtifact(SpecmineError):
    """A stage subcommand requires an artifact a prior stage has not written."""
