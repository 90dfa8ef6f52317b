"""Exception hierarchy shared across the pipeline.

CLI exit-code mapping: ValidationError (and subclasses) -> 1,
ProviderError (and subclasses) -> 2.
"""


class UtilityRankError(Exception):
    """Base class for all pipeline errors."""


class ValidationError(UtilityRankError):
    """Malformed or inconsistent input data (files, records, configs)."""


class ScoreParseError(ValidationError):
    """A model response did not contain a usable 1-5 score."""


class ZeroCitationError(UtilityRankError):
    """A reasoning trace cited no valid passage tags.

    Surfaced separately from parse failures so callers can retry or skip
    the question rather than abort the run.
    """

    def __init__(self, question_id: str):
        super().__init__(f"trace for question {question_id!r} cites no valid passage tags")
        self.question_id = question_id


class ProviderError(UtilityRankError):
    """A chat-completion provider failed (network, payload, retries)."""


class AuthenticationError(ProviderError):
    """The provider rejected our credential."""
