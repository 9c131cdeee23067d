"""Exception hierarchy shared across the package.

The CLI maps these onto exit-code categories, so raising the right class
matters more than the message wording.
"""


class DisenmixError(Exception):
    """Base class for all package errors."""


class ShapeError(DisenmixError, ValueError):
    """Tensor or array shapes do not line up for the requested operation."""


class ValidationError(DisenmixError, ValueError):
    """An input value violates a documented precondition."""


class ConfigError(DisenmixError, ValueError):
    """A configuration field is missing, malformed, or out of range."""


class DataError(DisenmixError, ValueError):
    """A dataset is unusable (empty split, missing class, bad counts)."""


class FormatError(DisenmixError, ValueError):
    """A binary file could not be parsed.

    ``offset`` is the byte position at which parsing failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class VersionError(FormatError):
    """A binary file carries an unsupported format version."""


class NumericError(DisenmixError, RuntimeError):
    """Training produced a non-finite value and was aborted."""
