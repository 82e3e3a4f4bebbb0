"""Exception types shared across the package."""


class MajorantError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MajorantError, ValueError):
    """An input violates a documented precondition."""


class FieldFormatError(MajorantError, ValueError):
    """A field file could not be parsed.

    ``offset`` is the byte offset (binary) or line number (csv) where parsing failed.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class DomainError(MajorantError, ValueError):
    """A numeric parameter lies outside the operator's domain."""


class ConfigError(MajorantError, ValueError):
    """A configuration object is inconsistent."""


class SizeError(MajorantError, ValueError):
    """An instance is too large for an exhaustive routine."""
