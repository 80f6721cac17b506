"""Exception types shared across the toolkit."""


class EmovcError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(EmovcError):
    """Input data violates a precondition (empty, NaN, wrong domain)."""


class ShapeError(InvalidInputError):
    """Array shape does not match the contract of the operation."""


class ParseError(EmovcError):
    """A text input (manifest, config) could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyDomainError(EmovcError):
    """An operation that needs at least one sample received none."""


class ConfigurationError(EmovcError):
    """Inconsistent or unsupported configuration."""


class CheckpointError(EmovcError):
    """Checkpoint file is corrupt or has an incompatible version."""


class UsageError(EmovcError):
    """Bad command line; the CLI turns this into exit code 1."""
