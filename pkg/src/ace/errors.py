"""Exception types shared across the package."""


class AceError(Exception):
    """Base class for all package errors."""


class ConfigError(AceError):
    """Invalid configuration value or malformed config file."""


class DomainError(AceError):
    """Operation called with arguments outside its domain."""


class ParseError(AceError):
    """Malformed serialized artifact (model file, maze text, records)."""


class InternalError(AceError):
    """Invariant violation that should be impossible by construction."""


class InsufficientDataError(AceError):
    """Too few observations for the requested statistic."""


class UndefinedEffectError(AceError):
    """Effect size is undefined (zero pooled variance)."""
