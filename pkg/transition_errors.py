#!/usr/bin/env python3
"""
Transition Toolkit Exceptions
One hierarchy for every failure the toolkit reports, each mapped to a CLI exit code
"""


class TransitionToolkitError(Exception):
    """Base class for toolkit errors."""

    exit_code = 2


class InvalidInputError(TransitionToolkitError, ValueError):
    """Raised when frames, trials, matrices or parameters violate a precondition."""


class TrialLoadError(InvalidInputError):
    """Raised when a trial CSV cannot be parsed; `row` is the 1-based data row."""

    def __init__(self, message, row=None, path=None):
        self.row = row
        self.path = path
        location = ""
        if path is not None:
            location += f"{path}"
        if row is not None:
            location += f" (row {row})"
        super().__init__(f"{location}: {message}" if location else message)


class IncompleteConfigError(TransitionToolkitError):
    """Raised when a threshold set or run configuration is missing entries."""


class DegenerateStatsError(TransitionToolkitError, ArithmeticError):
    """Raised when SBA rescaling has a zero or sign-flipping denominator."""

    exit_code = 3


class NumericalFailureError(TransitionToolkitError, ArithmeticError):
    """Raised when a factorization fails even after jitter escalation."""

    exit_code = 3


class UsageError(TransitionToolkitError):
    """Raised for unknown flags or subcommands."""

    exit_code = 1


class OptimizationAbortedError(TransitionToolkitError):
    """Raised when an objective evaluation fails mid-search; `partial` holds the trace so far."""

    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)
