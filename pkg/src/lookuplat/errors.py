"""Exception hierarchy shared by the library and the CLI."""


class LookupLaterationError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(LookupLaterationError, ValueError):
    """A text input line could not be parsed."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class RejectedSampleError(ParseError):
    """A sample line parsed but carries no usable readings."""


class NoInformationError(LookupLaterationError):
    """A query cannot be localized at all (no readings, no usable reference)."""


class InsufficientObservationsError(LookupLaterationError, ValueError):
    """Lateration was asked to solve with fewer than three readings."""


class ConfigError(LookupLaterationError, ValueError):
    """Invalid parameter combination in a run configuration."""
