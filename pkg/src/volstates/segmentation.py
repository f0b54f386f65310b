"""Two-level recurrence coding that splits a timeline into intensity states.

The search works on the recurrence-time sequence of an excursion process.
For each first-level threshold T_i the gaps are re-coded to 0-1 (gap >= T_i),
and sustained runs of zeros in that second-level code (runs of at least
T_star consecutive small gaps) are mapped back to original-time intervals of
high event intensity.  Set differences of those interval unions yield the
state labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoding import ExcursionProcess, RecurrenceSequence, recurrence_times
from .errors import InvalidThresholdError


@dataclass
class SearchParams:
    """Tuning parameters of the multi-state search.

    ``thresholds`` is the strictly increasing first-level vector
    (T_1 < ... < T_{m-1}); ``t_star`` is the shared second-level threshold.
    The implied state count is ``len(thresholds) + 1``.
    """

    thresholds: tuple
    t_star: int

    def __post_init__(self):
        self.thresholds = tuple(int(t) for t in self.thresholds)
        self.t_star = int(self.t_star)
        if len(self.thresholds) == 0:
            raise InvalidThresholdError("need at least one first-level threshold")
        if any(t < 1 for t in self.thresholds) or self.t_star < 1:
            raise InvalidThresholdError("all thresholds must be >= 1")
        if any(a >= b for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise InvalidThresholdError("first-level thresholds must be strictly increasing")

    @property
    def m(self) -> int:
        return len(self.thresholds) + 1


@dataclass
class StateAssignment:
    """Per-time-point state labels with per-state emission estimates.

    Labels are in {1..m}.  ``seg_intervals[i]`` holds the raw interval union
    recorded for first-level threshold i (inclusive index pairs in original
    time).  ``num_alternations`` is the number of maximal constant-label runs.
    ``emissions[s-1]`` is the event frequency within state s (NaN when the
    state has no support).
    """

    labels: np.ndarray
    seg_intervals: list
    num_alternations: int
    emissions: np.ndarray
    degenerate: bool = False

    @property
    def m(self) -> int:
        return len(self.emissions)

    def support_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.m + 1)[1:]


def second_level_code(rec_or_gaps, t_i: int) -> np.ndarray:
    """Re-code a recurrence sequence to 0-1: entry is 1 iff gap >= t_i."""
    if t_i < 1:
        raise InvalidThresholdError("t_i must be >= 1")
    gaps = rec_or_gaps.gaps if isinstance(rec_or_gaps, RecurrenceSequence) else np.asarray(rec_or_gaps)
    return (gaps >= t_i).astype(np.uint8)


def _zero_runs(code: np.ndarray):
    """Maximal runs of zeros in a 0-1 array, as inclusive (start, end) pairs."""
    padded = np.concatenate(([1], code, [1]))
    starts = np.flatnonzero((padded[1:-1] == 0) & (padded[:-2] == 1))
    ends = np.flatnonzero((padded[1:-1] == 0) & (padded[2:] == 1))
    return starts, ends


def segments_for_threshold(rec: RecurrenceSequence, t_i: int, t_star: int):
    """Original-time intervals of sustained high intensity at level ``t_i``.

    A qualifying run of zeros in the second-level code spans recurrence
    entries [a, b].  Entry j is the gap preceding event j, so the run opens
    just after event a-1 and closes at event b; boundary runs are anchored at
    the sequence ends.  Returns inclusive (start, end) pairs, 0-indexed.
    """
    code = second_level_code(rec, t_i)
    starts, ends = _zero_runs(code)
    if len(starts) == 0:
        return []
    lengths = ends - starts + 1
    keep = lengths >= t_star
    starts, ends = starts[keep], ends[keep]
    pos = rec.event_positions
    n_star = len(rec.gaps)
    out = []
    for a, b in zip(starts, ends):
        lo = 0 if a == 0 else int(pos[a - 1]) + 1
        hi = rec.n - 1 if b == n_star - 1 else int(pos[b])
        if lo <= hi:
            out.append((lo, hi))
    return out


def _labels_from_segments(n: int, seg_lists, m: int) -> np.ndarray:
    """Assign each time point the smallest i whose Seg_i covers it, else m."""
    labels = np.full(n, m, dtype=np.int64)
    for i in range(m - 1, 0, -1):
        for lo, hi in seg_lists[i - 1]:
            labels[lo:hi + 1] = i
    return labels


def _num_alternations(labels: np.ndarray) -> int:
    if len(labels) == 0:
        return 0
    return int(np.count_nonzero(np.diff(labels))) + 1


def _emissions_from_labels(bits: np.ndarray, labels: np.ndarray, m: int) -> np.ndarray:
    counts = np.bincount(labels, minlength=m + 1)[1:].astype(float)
    ones = np.bincount(labels, weights=bits, minlength=m + 1)[1:]
    with np.errstate(invalid="ignore"):
        return np.where(counts > 0, ones / np.maximum(counts, 1), np.nan)


def search_segments(x: ExcursionProcess, params: SearchParams,
                    rec: RecurrenceSequence | None = None) -> StateAssignment:
    """Run the multi-state search for one parameter combination.

    ``rec`` may be passed to avoid recomputing the recurrence sequence when
    many parameter combinations are evaluated on the same process.
    """
    bits = x.bits
    n = len(bits)
    m = params.m
    if x.n_events == 0:
        labels = np.full(n, m, dtype=np.int64)
        emissions = np.full(m, np.nan)
        emissions[m - 1] = 0.0
        return StateAssignment(labels, [[] for _ in params.thresholds], 1,
                               emissions, degenerate=True)
    if rec is None:
        rec = recurrence_times(x)
    seg_lists = [segments_for_threshold(rec, t_i, params.t_star)
                 for t_i in params.thresholds]
    labels = _labels_from_segments(n, seg_lists, m)
    return StateAssignment(
        labels,
        seg_lists,
        _num_alternations(labels),
        _emissions_from_labels(bits, labels, m),
    )


def relabel_by_emission(a: StateAssignment) -> StateAssignment:
    """Re-index states so label 1 has the highest event frequency.

    Empty states sort last.  Keeps labeling stable across parameterizations:
    after relabeling, state m is always the lowest-intensity state present.
    """
    m = a.m
    key = np.where(np.isnan(a.emissions), -np.inf, a.emissions)
    order = np.argsort(-key, kind="stable")  # old state index (0-based), by desc emission
    new_of_old = np.empty(m, dtype=np.int64)
    new_of_old[order] = np.arange(1, m + 1)
    labels = new_of_old[a.labels - 1]
    emissions = a.emissions[order]
    seg = [a.seg_intervals[i] for i in range(len(a.seg_intervals))]
    return StateAssignment(labels, seg, a.num_alternations, emissions, a.degenerate)
