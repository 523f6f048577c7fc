"""Exception types shared across the package."""


class FarmsimError(Exception):
    """Base class for all farmsim errors."""


class InvalidParameterError(FarmsimError):
    """A parameter violates its documented range or invariant."""


class UnstableQueueError(InvalidParameterError):
    """The queue has no steady state (theta = 0 and lambda >= n*mu)."""


class InsufficientHistoryError(FarmsimError):
    """The estimator needs more observed bins than the trace provides."""


class EmptyTraceError(FarmsimError):
    """A workload trace contains no bins / no entries."""


class TraceFormatError(FarmsimError):
    """A trace file is malformed; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(FarmsimError):
    """An experiment configuration fails validation."""


class WorkloadExhaustedError(FarmsimError):
    """The workload does not cover the requested simulation horizon."""
