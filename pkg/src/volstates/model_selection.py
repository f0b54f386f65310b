"""Penalized-likelihood scoring and parameter search for the state search.

Candidate parameter combinations (T_1 < ... < T_{m-1}, T_star) are scored by
a penalized Bernoulli log-likelihood: the data term treats each state's bits
as i.i.d. with the state's estimated event frequency, and each alternation
between states costs ``k`` (2 for AIC, ln n for BIC).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .encoding import ExcursionProcess, ReturnSeries, encode_one_sided, recurrence_times
from .errors import EmptySegmentError, NoModelError, NoSeparatingThresholdError
from .segmentation import (SearchParams, StateAssignment, _labels_from_segments,
                           _num_alternations, relabel_by_emission, search_segments,
                           segments_for_threshold)

DEFAULT_BUDGET = 2000


@dataclass
class LossConfig:
    """Configuration of the penalized search.

    ``k`` is the alternation penalty (2 = AIC, ln(n) = BIC).  ``t_grid`` and
    ``t_star_grid`` override the data-driven default candidate sets.  When the
    candidate count exceeds ``budget`` a seeded uniform sample without
    replacement is evaluated instead of the full grid.
    """

    k: float = 2.0
    m: int = 2
    t_grid: tuple | None = None
    t_star_grid: tuple | None = None
    budget: int = DEFAULT_BUDGET
    seed: int = 0

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("penalty coefficient k must be > 0")
        if self.m < 2:
            raise ValueError("state count m must be >= 2")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")

    @classmethod
    def aic(cls, **kw) -> "LossConfig":
        return cls(k=2.0, **kw)

    @classmethod
    def bic(cls, n: int, **kw) -> "LossConfig":
        return cls(k=float(np.log(n)), **kw)


@dataclass
class DecodeResult:
    """Outcome of the parameter search: the argmin and its assignment."""

    best_params: SearchParams
    best_assignment: StateAssignment
    best_loss: float
    trace: list = field(default_factory=list)

    def to_dict(self, include_trace: bool = False) -> dict:
        out = {
            "params": {"thresholds": list(self.best_params.thresholds),
                       "t_star": self.best_params.t_star,
                       "m": self.best_params.m},
            "loss": self.best_loss,
            "labels": self.best_assignment.labels.tolist(),
            "emissions": [None if np.isnan(p) else float(p)
                          for p in self.best_assignment.emissions],
            "num_alternations": self.best_assignment.num_alternations,
        }
        if include_trace:
            out["trace"] = [{"thresholds": list(t), "t_star": ts, "loss": l}
                            for (t, ts), l in self.trace]
        return out


def estimate_emission(x: ExcursionProcess, segment) -> float:
    """Event frequency within an index set: (# of 1s) / (segment length).

    This is the Bernoulli MLE, and the reciprocal of the mean inter-event
    trial count, i.e. the geometric MLE for the segment's recurrence times.
    """
    idx = np.asarray(segment)
    if idx.dtype == bool:
        size = int(idx.sum())
        ones = int(x.bits[idx].sum())
    else:
        size = len(idx)
        ones = int(x.bits[idx].sum()) if size else 0
    if size == 0:
        raise EmptySegmentError("emission estimate undefined on an empty segment")
    return ones / size


def _clamp(p: np.ndarray, n: int) -> np.ndarray:
    eps = 1.0 / (2 * n)
    return np.clip(p, eps, 1.0 - eps)


def loss(x: ExcursionProcess, a: StateAssignment, k: float) -> float:
    """Penalized loss: -2 * sum of per-state Bernoulli log-likelihoods + k*N."""
    bits = x.bits
    n = len(bits)
    m = a.m
    counts = np.bincount(a.labels, minlength=m + 1)[1:].astype(float)
    if np.any(counts == 0):
        return math.inf
    ones = np.bincount(a.labels, weights=bits, minlength=m + 1)[1:]
    return _penalized_loss(ones, counts, n, k, a.num_alternations)


def _penalized_loss(ones, counts, n, k, num_alt) -> float:
    p = _clamp(ones / counts, n)
    data_term = float(np.sum(ones * np.log(p) + (counts - ones) * np.log1p(-p)))
    return -2.0 * data_term + k * num_alt


def default_t_grid(gaps: np.ndarray) -> tuple:
    """First-level candidates: unique gap-quantile values, >= 1.

    Levels run from the median deep into the tail: the gap pool is dominated
    by the highest-intensity regime, so the thresholds that isolate
    low-intensity regimes sit at extreme quantiles.
    """
    levels = np.concatenate([np.arange(0.5, 0.96, 0.05),
                             [0.96, 0.97, 0.98, 0.99, 0.995, 0.999]])
    vals = np.quantile(gaps, levels).astype(np.int64)
    vals = np.unique(np.maximum(vals, 1))
    return tuple(int(v) for v in vals)


def default_t_star_grid(n_star: int, max_points: int = 15) -> tuple:
    """Second-level candidates: quantile-spaced integers in {ceil(n*/25)..ceil(n*/4)}.

    The floor keeps run-length requirements proportional to the sequence
    length; very small values admit ragged segmentations that the alternation
    penalty alone cannot price out.
    """
    lo = max(2, math.ceil(n_star / 25))
    hi = max(lo, math.ceil(n_star / 4))
    rng_vals = np.arange(lo, hi + 1)
    if len(rng_vals) <= max_points:
        vals = rng_vals
    else:
        vals = np.unique(np.round(np.quantile(rng_vals, np.linspace(0, 1, max_points))).astype(np.int64))
    return tuple(int(v) for v in vals)


def _candidate_thetas(t_grid, t_star_grid, m):
    combos = list(itertools.combinations(sorted(t_grid), m - 1))
    return [(t, ts) for t in combos for ts in t_star_grid]


def optimize_theta(x: ExcursionProcess, cfg: LossConfig,
                   keep_trace: bool = True) -> DecodeResult:
    """Search candidate (T, T_star) combinations for the minimal loss.

    Ties are broken by fewer alternations, then by lexicographically smaller
    parameters, so the result is independent of evaluation order.
    """
    bits = x.bits
    n = len(bits)
    rec = recurrence_times(x)
    m = cfg.m
    if x.n_events == 0:
        raise NoModelError("no events in the excursion process; nothing to segment")

    t_grid = cfg.t_grid if cfg.t_grid is not None else default_t_grid(rec.gaps)
    ts_grid = cfg.t_star_grid if cfg.t_star_grid is not None else default_t_star_grid(len(rec.gaps))
    if len(t_grid) < m - 1:
        raise NoModelError(f"grid has {len(t_grid)} first-level candidates, need {m - 1}")

    thetas = _candidate_thetas(t_grid, ts_grid, m)
    if len(thetas) > cfg.budget:
        rng = np.random.default_rng(cfg.seed)
        idx = np.sort(rng.choice(len(thetas), size=cfg.budget, replace=False))
        thetas = [thetas[i] for i in idx]

    # Segment lists depend only on (T_i, t_star); cache them across combos.
    seg_cache = {}

    def segs(t_i, ts):
        key = (t_i, ts)
        if key not in seg_cache:
            seg_cache[key] = segments_for_threshold(rec, t_i, ts)
        return seg_cache[key]

    best = None  # (loss, num_alt, theta, labels)
    trace = []
    for theta in thetas:
        t_vec, ts = theta
        seg_lists = [segs(t_i, ts) for t_i in t_vec]
        labels = _labels_from_segments(n, seg_lists, m)
        counts = np.bincount(labels, minlength=m + 1)[1:].astype(float)
        ones = np.bincount(labels, weights=bits, minlength=m + 1)[1:]
        # States with empty support drop out: the candidate collapses to a
        # model with fewer states (this is how a one-state fit stays reachable
        # on homogeneous data).
        present = counts > 0
        num_alt = _num_alternations(labels)
        val = _penalized_loss(ones[present], counts[present], n, cfg.k, num_alt)
        if keep_trace:
            trace.append((theta, val))
        key = (val, num_alt, theta)
        if best is None or key < best[:3]:
            best = (val, num_alt, theta, labels)

    if best is None:
        raise NoModelError("all candidate parameter combinations were rejected")

    val, _, theta, _ = best
    params = SearchParams(theta[0], theta[1])
    assignment = relabel_by_emission(search_segments(x, params, rec=rec))
    return DecodeResult(params, assignment, val, trace)


def max_min_threshold(returns: ReturnSeries, candidates, cfg: LossConfig,
                      decode_fn=None):
    """Max-min threshold choice: maximize the minimal pairwise separation
    of per-state emission estimates across decoded states.

    Returns ``(best_pi, separations)`` where ``separations`` maps each
    candidate threshold to its minimal pairwise |emission difference| (NaN
    when fewer than two states were decoded).
    """
    decode_fn = decode_fn or (lambda xx: optimize_theta(xx, cfg, keep_trace=False))
    separations = {}
    best = None
    for pi in candidates:
        x = encode_one_sided(returns, pi)
        try:
            result = decode_fn(x)
        except NoModelError:
            separations[pi] = math.nan
            continue
        p = result.best_assignment.emissions
        p = p[~np.isnan(p)]
        if len(p) < 2:
            separations[pi] = math.nan
            continue
        diffs = [abs(a - b) for a, b in itertools.combinations(p, 2)]
        sep = min(diffs)
        separations[pi] = sep
        if sep > 0 and (best is None or sep > best[1]):
            best = (pi, sep)
    if best is None:
        raise NoSeparatingThresholdError("no candidate threshold separates the states")
    return best[0], separations
