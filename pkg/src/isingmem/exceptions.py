class IsingMemError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(IsingMemError, ValueError):
    """Invalid parameters or layout."""


class InvalidSizeError(ConfigError):
    pass


class DecoderBugError(IsingMemError, RuntimeError):
    """A decoder operation was asked to do something impossible."""


class FitError(IsingMemError, RuntimeError):
    """A fit failed to converge or had unusable input."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []
