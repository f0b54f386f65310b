"""1-step-ahead forecasting by historical pattern matching.

A training window of the most recent ``window`` observations is scored under
a probability model, every same-length window further back in the history is
scored the same way, and the best-matching window's next-step move (with a
sign correction) is replayed as the forecast.  Two scoring engines are
provided: a Gaussian-HMM likelihood and a nonparametric likelihood built
from the decoded per-time CDF estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .aggregation import DEFAULT_LEVELS, ThresholdLadder, encode_decode
from .encoding import ReturnSeries
from .errors import InsufficientHistoryError, InvalidInputError
from .hmm import baum_welch, log_likelihood
from .model_selection import LossConfig

LOG_FLOOR = 1e-12

ENGINES = ("nonparametric", "gaussian_hmm")


@dataclass
class ForecastConfig:
    """Settings of the pattern-matching forecaster.

    ``window`` is the training window length D; ``engine`` selects the
    scoring model.  The nonparametric engine decodes the history once per
    forecast origin over a quantile ladder at ``levels`` with ``m`` states
    per threshold; the HMM engine fits ``hmm_states`` Gaussian states on the
    training window.
    """

    window: int = 200
    engine: str = "nonparametric"
    levels: tuple = DEFAULT_LEVELS
    m: int = 2
    loss: LossConfig | None = None
    hmm_states: int = 4
    hmm_restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.window < 10:
            raise InvalidInputError("training window must be >= 10")
        if self.engine not in ENGINES:
            raise InvalidInputError(f"unknown engine {self.engine!r}")
        if self.loss is None:
            self.loss = LossConfig(k=2.0, m=self.m, seed=self.seed)


def bin_masses(state_cdf, thresholds) -> np.ndarray:
    """Probability mass per ladder bin from CDF values at sorted thresholds.

    With V thresholds there are V+1 bins: (-inf, t_1], (t_1, t_2], ...,
    (t_V, inf).  The masses are the telescoping CDF differences with the
    conventions F(t_0) = 0 and F(t_{V+1}) = 1, so they always sum to 1.
    """
    cdf = np.asarray(state_cdf, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    if cdf.shape != thresholds.shape:
        raise InvalidInputError("one CDF value per threshold required")
    if np.any(np.diff(thresholds) <= 0):
        raise InvalidInputError("thresholds must be strictly increasing")
    if np.any(np.diff(cdf) < 0) or np.any(cdf < 0) or np.any(cdf > 1):
        raise InvalidInputError("state CDF must be monotone within [0,1]")
    return np.diff(np.concatenate(([0.0], cdf, [1.0])))


def obs_prob_nonparam(y: float, state_cdf, thresholds) -> float:
    """Probability of observing ``y``: the mass of the bin containing it."""
    masses = bin_masses(state_cdf, thresholds)
    idx = int(np.searchsorted(np.asarray(thresholds, dtype=float), y, side="left"))
    return float(masses[idx])


def isotonic_repair(cdf: np.ndarray):
    """Force each column of a threshold-by-time CDF matrix nondecreasing.

    Independent per-threshold decodes occasionally produce locally inverted
    CDF estimates; a running maximum (clipped to [0, 1]) is the minimal
    correction.  Returns ``(repaired, changed)``.
    """
    fixed = np.clip(np.maximum.accumulate(cdf, axis=0), 0.0, 1.0)
    return fixed, bool(np.any(fixed != cdf))


@dataclass
class NonparametricEngine:
    """Likelihood engine backed by the decoded per-time CDF estimates.

    The full history is decoded once (one run per ladder threshold); the
    resulting per-time bin masses are then reused to score every candidate
    window, conditioning each observation on the state decoded at its own
    absolute time.
    """

    cfg: ForecastConfig
    thresholds: np.ndarray = field(default=None, repr=False)
    masses: np.ndarray = field(default=None, repr=False)  # (V+1, n)
    repaired: bool = False

    def fit(self, values: np.ndarray) -> "NonparametricEngine":
        values = np.asarray(values, dtype=float)
        rs = ReturnSeries.from_values(values)
        ladder = ThresholdLadder.from_quantiles(values, self.cfg.levels)
        em = encode_decode(rs, ladder, self.cfg.loss)
        thresholds, cdf = em.lower_tail_cdf()
        cdf, self.repaired = isotonic_repair(cdf)
        self.thresholds = thresholds
        pad = np.vstack([np.zeros(cdf.shape[1]), cdf, np.ones(cdf.shape[1])])
        self.masses = np.diff(pad, axis=0)
        return self

    def window_log_prob(self, values: np.ndarray, start: int, stop: int) -> float:
        """Log probability of ``values[start:stop]`` at its absolute times."""
        bins = np.searchsorted(self.thresholds, values[start:stop], side="left")
        p = self.masses[bins, np.arange(start, stop)]
        return float(np.sum(np.log(np.maximum(p, LOG_FLOOR))))


@dataclass
class GaussianHmmEngine:
    """Likelihood engine: Gaussian HMM calibrated on the training window."""

    cfg: ForecastConfig
    params: object = field(default=None, repr=False)

    def fit(self, values: np.ndarray) -> "GaussianHmmEngine":
        values = np.asarray(values, dtype=float)
        train = values[len(values) - self.cfg.window:]
        self.params, _ = baum_welch(train, self.cfg.hmm_states,
                                    kind="gaussian",
                                    n_restarts=self.cfg.hmm_restarts,
                                    seed=self.cfg.seed)
        return self

    def window_log_prob(self, values: np.ndarray, start: int, stop: int) -> float:
        return float(log_likelihood(values[start:stop], self.params))


def _make_engine(cfg: ForecastConfig):
    if cfg.engine == "nonparametric":
        return NonparametricEngine(cfg)
    return GaussianHmmEngine(cfg)


def match_and_forecast(history, cfg: ForecastConfig):
    """Predict the next value after ``history`` and report the matched offset.

    The training window is the last ``cfg.window`` points.  Candidate windows
    are scored at offsets k = 1..T-D; the offset minimizing the absolute
    log-probability distance to the training window wins, with ties broken
    toward the most recent candidate.  The prediction replays the matched
    window's next move, signed by the score comparison (sign(0) = 0).
    Returns ``(prediction, k_star)``.
    """
    values = np.asarray(history, dtype=float)
    T = len(values)
    D = cfg.window
    if T < 2 * D:
        raise InsufficientHistoryError(
            f"need at least {2 * D} observations, got {T}")
    engine = _make_engine(cfg).fit(values)
    score_tr = engine.window_log_prob(values, T - D, T)
    best = None  # (distance, k)
    for k in range(1, T - D + 1):
        s = engine.window_log_prob(values, T - D - k, T - k)
        key = (abs(score_tr - s), k)
        if best is None or key < best[:2]:
            best = (key[0], k, s)
    _, k_star, score_match = best
    sign = float(np.sign(score_tr - score_match))
    step = values[T - k_star] - values[T - k_star - 1]
    return float(values[T - 1] + step * sign), k_star


@dataclass
class ForecastErrors:
    """Standard 1-step-ahead error summary."""

    rmse: float
    mae: float
    mape: float
    mape_excluded: int

    def to_dict(self) -> dict:
        return {"rmse": self.rmse, "mae": self.mae, "mape": self.mape,
                "mape_excluded": self.mape_excluded}


def forecast_errors(predictions, actuals) -> ForecastErrors:
    """RMSE / MAE / MAPE(%) of predictions against realized values.

    Zero actuals are excluded from the MAPE average and counted in
    ``mape_excluded``.
    """
    pred = np.asarray(predictions, dtype=float)
    act = np.asarray(actuals, dtype=float)
    if pred.shape != act.shape or pred.ndim != 1 or len(pred) == 0:
        raise InvalidInputError("predictions and actuals must be equal-length 1-d arrays")
    err = pred - act
    rmse = float(np.sqrt(np.mean(err ** 2)))
    mae = float(np.mean(np.abs(err)))
    nz = act != 0
    mape = float(np.mean(np.abs(err[nz] / act[nz])) * 100) if nz.any() else math.nan
    return ForecastErrors(rmse, mae, mape, int((~nz).sum()))


def rolling_forecast(values, cfg: ForecastConfig, n_forecasts: int):
    """Walk-forward 1-step forecasts over the last ``n_forecasts`` points.

    For each forecast origin the model only sees data strictly before the
    predicted time stamp.  Returns ``(predictions, actuals, offsets)``.
    """
    values = np.asarray(values, dtype=float)
    if n_forecasts < 1:
        raise InvalidInputError("n_forecasts must be >= 1")
    first_target = len(values) - n_forecasts
    if first_target < 2 * cfg.window:
        raise InsufficientHistoryError(
            "history too short for the requested number of forecasts")
    preds, offs = [], []
    for target in range(first_target, len(values)):
        pred, k_star = match_and_forecast(values[:target], cfg)
        preds.append(pred)
        offs.append(k_star)
    return np.array(preds), values[first_target:].copy(), np.array(offs)
