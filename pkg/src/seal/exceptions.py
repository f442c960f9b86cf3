"""Exception types raised across the toolkit."""


class SealError(Exception):
    """Base class for all toolkit errors."""


class UsageError(SealError, RuntimeError):
    """An object was used out of its protocol (e.g. stepping a finished episode)."""


class DomainError(SealError, ValueError):
    """An argument lies outside its valid domain (bad action id, wrong dimension)."""


class ConfigurationError(SealError, ValueError):
    """A watermark spec or run configuration is invalid."""


class TrainingFault(SealError, RuntimeError):
    """Training produced a non-finite quantity and was aborted.

    The partial training log, when available, is attached as ``log``.
    """

    def __init__(self, message, diagnostics=None, log=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
        self.log = log


class ModelFileError(SealError, ValueError):
    """A model file could not be loaded."""
