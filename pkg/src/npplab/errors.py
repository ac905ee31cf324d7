"""Exception hierarchy shared across the package."""


class NpplabError(Exception):
    """Base class for all package errors."""


class ConfigError(NpplabError, ValueError):
    """Invalid parameter, option, or configuration file."""


class DegenerateChannelError(NpplabError, ValueError):
    """A channel has zero variance where a spread is required."""


class NumericalError(NpplabError, ArithmeticError):
    """A numerical routine diverged or produced non-finite values."""


class FormatError(NpplabError, ValueError):
    """A file does not conform to the expected binary/JSON layout."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
