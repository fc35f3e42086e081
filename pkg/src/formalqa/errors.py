"""Exception types shared across the package."""


class FormalQAError(Exception):
    """Base class for every error this package raises deliberately."""


class ConfigError(FormalQAError):
    pass


class DatasetError(FormalQAError):
    """Malformed problem-set file; ``line`` is the 1-based offending line."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class MissingFieldError(DatasetError):
    pass


class DuplicateIdError(DatasetError):
    pass


class EmptyFileError(DatasetError):
    pass


class PlaceholderMissingError(FormalQAError):
    pass


class EndpointUnreachableError(FormalQAError):
    pass


class MalformedResponseError(FormalQAError):
    pass


class ReplayMissError(FormalQAError):
    pass


class NoCodeBlockError(FormalQAError):
    pass


class NoLeanBlockError(FormalQAError):
    pass


class NoBoxedAnswerError(FormalQAError):
    pass


class KExceedsSamplesError(FormalQAError):
    pass


class EmptyMatrixError(FormalQAError):
    pass


class EmptyCellError(FormalQAError):
    pass


class SetMismatchError(FormalQAError):
    pass


class MissingRowError(FormalQAError):
    pass


class ConflictingFlagsError(FormalQAError):
    pass
