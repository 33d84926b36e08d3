"""Exception types shared across the package."""


class DiarefineError(Exception):
    """Base class for all errors raised by this package."""


class BackendUnavailable(DiarefineError):
    """A model backend failed to produce a usable response (after retries)."""


class BackendTimeout(BackendUnavailable):
    """A backend call exceeded its configured timeout."""


class InvalidAudio(DiarefineError):
    """Audio does not satisfy a backend precondition (e.g. not single-channel)."""


class WindowTooShort(DiarefineError):
    """Requested embedding window is below the backend's minimum duration."""


class UnparseableResponse(DiarefineError):
    """No usable structured payload could be extracted from an LLM response."""


class IncompleteMap(DiarefineError):
    """The LLM identity map does not cover every submitted speaker label."""


class MissingIdentity(DiarefineError):
    """A speaker label has no entry in the identity map."""


class DimensionMismatch(DiarefineError):
    """Embeddings of different dimensionality were mixed."""


class InvalidPlan(DiarefineError):
    """Chunking parameters cannot produce a valid window plan."""


class EmptyReference(DiarefineError):
    """Scoring was attempted against an empty reference."""


class ParseError(DiarefineError):
    """A structured input file could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class PipelineStageError(DiarefineError):
    """A pipeline stage failed; carries the stage name and the partial trace."""

    def __init__(self, stage: str, message: str, trace=None):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage
        self.trace = trace
