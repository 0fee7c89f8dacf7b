"""Exception types shared across the toolchain.

Everything user-facing derives from FastactError so the CLI can map
library failures to exit code 2 in one place.
"""


class FastactError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FastactError):
    """Invalid configuration value (bad n, empty range, unknown name, ...)."""


class EvaluationSingularity(FastactError):
    """A denominator hit zero while evaluating a rational form."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class FitFailure(FastactError):
    """Least-squares fit failed (rank deficiency or similar)."""

    def __init__(self, message, condition_estimate=None):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class PoleError(FitFailure):
    """A fitted denominator changes sign inside the fit range."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class CoeffsParseError(FastactError):
    """A coefficients file is malformed; message names the missing/bad field."""


class DataError(FastactError):
    """Dataset file unreadable or structurally invalid."""


class BenchError(FastactError):
    """A benchmark could not produce a trustworthy measurement."""
