"""Binary excursion coding of return series and recurrence-time extraction.

A return series is turned into a 0-1 event sequence by marking returns beyond
one threshold (one-sided) or outside a threshold pair (two-sided).  The gaps
between successive events form the recurrence-time sequence that all the
segmentation machinery operates on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidThresholdError


@dataclass
class ReturnSeries:
    """Timestamped log returns.

    ``timestamps`` may be clock time or a transaction index; it only has to be
    sorted nondecreasing.  ``values`` are dimensionless log returns.
    """

    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.timestamps.shape != self.values.shape:
            raise InvalidInputError("timestamps and values must have equal length")
        if self.values.ndim != 1:
            raise InvalidInputError("return series must be one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("return values must be finite")
        if np.any(np.diff(self.timestamps) < 0):
            raise InvalidInputError("timestamps must be sorted nondecreasing")

    def __len__(self):
        return len(self.values)

    @classmethod
    def from_values(cls, values) -> "ReturnSeries":
        values = np.asarray(values, dtype=float)
        return cls(np.arange(len(values), dtype=float), values)


@dataclass
class ExcursionProcess:
    """0-1 event sequence plus the threshold spec that produced it.

    Exactly one of the two specs is set: a two-sided pair ``(lower, upper)``
    or a one-sided signed threshold ``pi`` (negative marks the lower tail,
    positive the upper tail).
    """

    bits: np.ndarray
    lower: float | None = None
    upper: float | None = None
    pi: float | None = None

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if not np.all((self.bits == 0) | (self.bits == 1)):
            raise InvalidInputError("bits must be 0/1")

    def __len__(self):
        return len(self.bits)

    @property
    def n_events(self) -> int:
        return int(self.bits.sum())


@dataclass
class RecurrenceSequence:
    """Recurrence times of a 0-1 sequence.

    ``gaps[0]`` counts the zeros before the first event (0 when the sequence
    starts with an event), interior entries count zeros between successive
    events, and the last entry is the open trailing gap after the final event.
    Length is therefore (number of events) + 1, and
    ``sum(gaps) + n_events == n``.
    """

    gaps: np.ndarray
    event_positions: np.ndarray
    n: int

    def __post_init__(self):
        self.gaps = np.asarray(self.gaps, dtype=np.int64)
        self.event_positions = np.asarray(self.event_positions, dtype=np.int64)

    @property
    def n_events(self) -> int:
        return len(self.event_positions)

    def __len__(self):
        return len(self.gaps)


def log_returns(prices, timestamps=None) -> ReturnSeries:
    """Consecutive log returns ln(price_t / price_{t-1}) of a price series."""
    prices = np.asarray(prices, dtype=float)
    if len(prices) < 2:
        raise InvalidInputError("need at least two prices")
    if np.any(prices <= 0) or not np.all(np.isfinite(prices)):
        raise InvalidInputError("prices must be positive and finite")
    values = np.diff(np.log(prices))
    if timestamps is None:
        ts = np.arange(1, len(prices), dtype=float)
    else:
        ts = np.asarray(timestamps, dtype=float)[1:]
    return ReturnSeries(ts, values)


def encode_excursion(returns: ReturnSeries, lower: float, upper: float) -> ExcursionProcess:
    """Two-sided excursion coding: 1 iff return <= lower or return >= upper.

    Ties at either threshold count as events.
    """
    if not lower < upper:
        raise InvalidThresholdError(f"need lower < upper, got ({lower}, {upper})")
    v = returns.values
    bits = ((v <= lower) | (v >= upper)).astype(np.uint8)
    return ExcursionProcess(bits, lower=float(lower), upper=float(upper))


def encode_one_sided(returns: ReturnSeries, pi: float) -> ExcursionProcess:
    """One-sided excursion coding; the sign of ``pi`` selects the tail.

    pi < 0 marks return <= pi, pi > 0 marks return >= pi.
    """
    if pi == 0:
        raise InvalidThresholdError("pi == 0 is ambiguous; sign selects the tail")
    v = returns.values
    if pi < 0:
        bits = (v <= pi).astype(np.uint8)
    else:
        bits = (v >= pi).astype(np.uint8)
    return ExcursionProcess(bits, pi=float(pi))


def recurrence_times(x) -> RecurrenceSequence:
    """Recurrence-time sequence of an excursion process (or raw bit array)."""
    bits = x.bits if isinstance(x, ExcursionProcess) else np.asarray(x, dtype=np.uint8)
    n = len(bits)
    positions = np.flatnonzero(bits)
    if len(positions) == 0:
        return RecurrenceSequence(np.array([n]), positions, n)
    gaps = np.empty(len(positions) + 1, dtype=np.int64)
    gaps[0] = positions[0]
    gaps[1:-1] = np.diff(positions) - 1
    gaps[-1] = n - 1 - positions[-1]
    return RecurrenceSequence(gaps, positions, n)


def bits_from_gaps(gaps) -> np.ndarray:
    """Inverse of :func:`recurrence_times`: rebuild the 0-1 sequence from gaps."""
    gaps = np.asarray(gaps, dtype=np.int64)
    if len(gaps) == 1:
        return np.zeros(int(gaps[0]), dtype=np.uint8)
    pieces = []
    for g in gaps[:-1]:
        pieces.append(np.zeros(int(g), dtype=np.uint8))
        pieces.append(np.ones(1, dtype=np.uint8))
    pieces.append(np.zeros(int(gaps[-1]), dtype=np.uint8))
    return np.concatenate(pieces)


def quantile_threshold(values, level: float) -> float:
    """Empirical quantile with linear interpolation (the package-wide convention)."""
    return float(np.quantile(np.asarray(values, dtype=float), level))
