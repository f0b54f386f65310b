"""Seeded generators for the benchmark designs.

Every generator returns ``(observations, true_state_path)`` and is
deterministic given its seed.  Parallel replicates should derive independent
streams by seeding with (seed, replicate_id).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

CHANGEPOINT_FRACTIONS = (0.1, 0.2, 0.4, 0.7, 0.9)
REGIME_STATE_ORDER = (1, 2, 3, 2, 1, 3, 2, 1)


@dataclass
class SimSpec:
    """Specification of one simulated design."""

    kind: str
    n: int
    params: dict = field(default_factory=dict)
    seed: int = 0

    KINDS = ("bernoulli_changepoints", "bernoulli_hmm", "gaussian_hmm",
             "gmm_hmm", "regime_gaussian", "regime_t")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidInputError(f"unknown simulation kind {self.kind!r}")
        if self.n < 2:
            raise InvalidInputError("n must be >= 2")


def _alternating_states(n: int, fractions=CHANGEPOINT_FRACTIONS) -> np.ndarray:
    bounds = [0] + [int(f * n) for f in fractions] + [n]
    states = np.empty(n, dtype=np.int64)
    for i, (lo, hi) in enumerate(zip(bounds, bounds[1:])):
        states[lo:hi] = 1 if i % 2 == 0 else 2
    return states


def bernoulli_changepoints(n, p1, p2, rng) -> tuple:
    """Bernoulli observations over 7 alternating segments with fixed
    proportional change points at 0.1n, 0.2n, 0.4n, 0.7n, 0.9n."""
    _check_prob(p1, p2)
    states = _alternating_states(n)
    p = np.where(states == 1, p1, p2)
    obs = (rng.random(n) < p).astype(np.uint8)
    return obs, states


def _hmm_path(n, p12, rng, m=2) -> np.ndarray:
    if not 0 <= p12 <= 1:
        raise InvalidInputError("p12 must lie in [0,1]")
    states = np.empty(n, dtype=np.int64)
    states[0] = rng.integers(1, m + 1)
    flips = rng.random(n - 1) < p12
    cur = states[0]
    for t in range(1, n):
        if flips[t - 1]:
            cur = 1 if cur == 2 else 2
        states[t] = cur
    return states


def bernoulli_hmm(n, p1, p2, p12, rng) -> tuple:
    """2-state symmetric-transition HMM with Bernoulli emissions."""
    _check_prob(p1, p2)
    states = _hmm_path(n, p12, rng)
    p = np.where(states == 1, p1, p2)
    obs = (rng.random(n) < p).astype(np.uint8)
    return obs, states


def gaussian_hmm(n, sigma2_1, sigma2_2, p12, rng) -> tuple:
    """2-state symmetric-transition HMM with zero-mean Gaussian emissions."""
    if sigma2_1 <= 0 or sigma2_2 <= 0:
        raise InvalidInputError("variances must be positive")
    states = _hmm_path(n, p12, rng)
    sd = np.where(states == 1, np.sqrt(sigma2_1), np.sqrt(sigma2_2))
    return rng.normal(0.0, 1.0, size=n) * sd, states


def gmm_hmm(n, w_a, sigma2, p12, rng) -> tuple:
    """2-state HMM whose emissions are 2-component zero-mean Gaussian mixtures.

    ``sigma2`` is a (2, 2) array-like: sigma2[state-1][component] with
    components (a, b); ``w_a`` is the weight of component a (w_b = 1 - w_a).
    """
    sigma2 = np.asarray(sigma2, dtype=float)
    if sigma2.shape != (2, 2) or np.any(sigma2 <= 0):
        raise InvalidInputError("sigma2 must be a positive 2x2 array")
    if not 0 < w_a < 1:
        raise InvalidInputError("w_a must lie in (0,1)")
    states = _hmm_path(n, p12, rng)
    comp = (rng.random(n) >= w_a).astype(np.int64)  # 0 = a, 1 = b
    sd = np.sqrt(sigma2[states - 1, comp])
    return rng.normal(0.0, 1.0, size=n) * sd, states


def _regime_states(n: int) -> np.ndarray:
    """8 equal segments with state order 1,2,3,2,1,3,2,1."""
    bounds = np.linspace(0, n, len(REGIME_STATE_ORDER) + 1).astype(int)
    states = np.empty(n, dtype=np.int64)
    for s, lo, hi in zip(REGIME_STATE_ORDER, bounds, bounds[1:]):
        states[lo:hi] = s
    return states


def regime_gaussian(n, sigmas, rng) -> tuple:
    """Fixed 8-segment layout; zero-mean Gaussian with per-state std dev."""
    sigmas = np.asarray(sigmas, dtype=float)
    if len(sigmas) != 3 or np.any(sigmas <= 0):
        raise InvalidInputError("need three positive standard deviations")
    states = _regime_states(n)
    return rng.normal(0.0, 1.0, size=n) * sigmas[states - 1], states


def regime_t(n, dfs, rng) -> tuple:
    """Fixed 8-segment layout; Student-t with per-state degrees of freedom."""
    dfs = np.asarray(dfs, dtype=float)
    if len(dfs) != 3 or np.any(dfs <= 0):
        raise InvalidInputError("need three positive degrees of freedom")
    states = _regime_states(n)
    return rng.standard_t(dfs[states - 1], size=n), states


def _check_prob(*ps):
    for p in ps:
        if not 0 <= p <= 1:
            raise InvalidInputError("probabilities must lie in [0,1]")


def generate(spec: SimSpec) -> tuple:
    """Dispatch on ``spec.kind``; returns (observations, true state path)."""
    rng = np.random.default_rng(spec.seed)
    p = spec.params
    if spec.kind == "bernoulli_changepoints":
        return bernoulli_changepoints(spec.n, p["p1"], p["p2"], rng)
    if spec.kind == "bernoulli_hmm":
        return bernoulli_hmm(spec.n, p["p1"], p["p2"], p["p12"], rng)
    if spec.kind == "gaussian_hmm":
        return gaussian_hmm(spec.n, p["sigma2_1"], p["sigma2_2"], p["p12"], rng)
    if spec.kind == "gmm_hmm":
        return gmm_hmm(spec.n, p["w_a"], p["sigma2"], p["p12"], rng)
    if spec.kind == "regime_gaussian":
        return regime_gaussian(spec.n, p.get("sigmas", (1.0, 2.0, 3.0)), rng)
    if spec.kind == "regime_t":
        return regime_t(spec.n, p.get("dfs", (1.0, 2.0, 5.0)), rng)
    raise InvalidInputError(spec.kind)
