"""Exception hierarchy shared across the package."""


class PreferenceError(Exception):
    """Base class for all package errors."""


class ContractViolation(PreferenceError, ValueError):
    """An operation was called with inputs that break its preconditions."""


class EstimationError(PreferenceError, RuntimeError):
    """An estimator could not produce a valid result."""


class ConfigError(PreferenceError, ValueError):
    """A run configuration failed validation."""
