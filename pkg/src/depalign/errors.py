"""Error types shared across the toolchain.

Every failure the pipeline can surface deliberately derives from
:class:`CorpusError`, so callers (and the CLI) can distinguish expected
operational failures from genuine bugs.
"""

from __future__ import annotations


class CorpusError(Exception):
    """Base class for all deliberate toolchain failures."""


class GrammarUnsupported(CorpusError):
    """The grammar adapter does not handle this file type."""


class RootNotFound(CorpusError):
    """A dependency tree was requested for an unknown function."""


class EmptyInput(CorpusError):
    """An aggregate operation received nothing to aggregate."""


class ServiceUnavailable(CorpusError):
    """The summary endpoint kept failing after the retry budget."""


class CacheMiss(CorpusError):
    """Cache-only summarisation found no cached response."""


class EmptyResponse(CorpusError):
    """The summary endpoint returned a blank completion."""


class MissingBody(CorpusError):
    """A dependency tree node has no recorded function body."""


class MissingDescription(CorpusError):
    """Sample assembly was attempted without a usable description."""


class EmptyFormal(CorpusError):
    """A formal-statement record is missing its formal side."""


class AlphaOutOfRange(CorpusError):
    """A mixing weight fell outside the closed unit interval."""


class PositiveLogProb(CorpusError):
    """A log-probability entry was greater than zero."""


class KOutOfRange(CorpusError):
    """pass@k was asked for more attempts than were provided."""


class InsufficientSamples(CorpusError):
    """A sample pool ran dry before the requested stream was filled."""


class StageInputMissing(CorpusError):
    """A pipeline stage ran before the stage that feeds it."""


class IOFailure(CorpusError):
    """An artifact could not be read or written."""


class ConfigInvalid(CorpusError):
    """A run configuration value is out of bounds or malformed.

    ``field`` names the offending key so the CLI can report it
    machine-readably.
    """

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field
