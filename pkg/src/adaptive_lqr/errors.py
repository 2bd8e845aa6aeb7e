"""Exception taxonomy. CLI exit codes: 2 invalid input, 3 insufficient data, 4 numeric."""
from __future__ import annotations


class AdaptiveLqrError(Exception):
    """Base class for all package errors."""


class InvalidInputError(AdaptiveLqrError, ValueError):
    """Malformed arguments or config: bad shapes, non-finite values, failed validation."""


class NoDataError(AdaptiveLqrError):
    """An estimator was queried before any transition was recorded."""


class InsufficientDataError(AdaptiveLqrError):
    """Too few records or horizons for the requested statistic."""


class NotStabilizableError(AdaptiveLqrError):
    """The Riccati fixed-point iteration did not converge for the given pair."""


class NumericError(AdaptiveLqrError):
    """A numerically impossible situation (singular solve on a PD matrix, etc.)."""


class DivergedError(AdaptiveLqrError):
    """State norm crossed the divergence tripwire during simulation."""

    def __init__(self, fail_time: int, message: str | None = None):
        self.fail_time = fail_time
        super().__init__(message or f"state norm exceeded tripwire at t={fail_time}")
