"""Exception types shared across the package."""


class SpikeActError(Exception):
    """Base class for every error raised deliberately by this package."""


class IngestionError(SpikeActError, OSError):
    """A dataset directory or file could not be read."""


class EmptySequenceError(IngestionError):
    """A sequence directory holds no frames."""


class FormatError(SpikeActError, ValueError):
    """A file or tensor does not follow the expected layout."""


class StageError(SpikeActError, RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
