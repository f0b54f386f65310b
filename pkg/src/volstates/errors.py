"""Exception types shared across the package."""


class VolstatesError(Exception):
    """Base class for all package errors."""


class InvalidInputError(VolstatesError):
    """Input data violates a precondition (nonpositive price, bad CSV, ...)."""


class InvalidThresholdError(VolstatesError):
    """Threshold specification is inadmissible (l >= u, pi == 0, ...)."""


class EmptySegmentError(VolstatesError):
    """An emission estimate was requested on an empty segment."""


class NoModelError(VolstatesError):
    """Every candidate parameter combination was rejected."""


class NoSeparatingThresholdError(VolstatesError):
    """No candidate threshold produced at least two separated states."""


class InsufficientHistoryError(VolstatesError):
    """Not enough history for the requested forecasting window."""
