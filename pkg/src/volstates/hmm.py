"""Reference hidden Markov models: exact decoding and EM fitting.

Supports Bernoulli and Gaussian emissions.  Forward/backward recursions are
scaled, so sequences of 10^4+ observations do not underflow; Viterbi runs in
the log domain.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, VolstatesError

VAR_FLOOR = 1e-6


class ImpossibleObservationError(VolstatesError):
    """An observation has zero probability under every state."""


@dataclass
class HmmParams:
    """HMM parameters with Bernoulli or Gaussian emissions.

    ``trans`` is row-stochastic.  For ``kind == 'bernoulli'`` the emission is
    ``emit_p`` (per-state event probability); for ``'gaussian'`` it is
    ``means`` and ``variances``.
    """

    init: np.ndarray
    trans: np.ndarray
    kind: str = "bernoulli"
    emit_p: np.ndarray | None = None
    means: np.ndarray | None = None
    variances: np.ndarray | None = None
    variance_floored: bool = False

    def __post_init__(self):
        self.init = np.asarray(self.init, dtype=float)
        self.trans = np.asarray(self.trans, dtype=float)
        m = len(self.init)
        if self.trans.shape != (m, m):
            raise InvalidInputError("transition matrix shape mismatch")
        if not np.allclose(self.trans.sum(axis=1), 1.0, atol=1e-12):
            raise InvalidInputError("transition rows must sum to 1")
        if not np.isclose(self.init.sum(), 1.0, atol=1e-10):
            raise InvalidInputError("initial distribution must sum to 1")
        if self.kind == "bernoulli":
            self.emit_p = np.asarray(self.emit_p, dtype=float)
            if np.any((self.emit_p < 0) | (self.emit_p > 1)):
                raise InvalidInputError("Bernoulli emissions must lie in [0,1]")
        elif self.kind == "gaussian":
            self.means = np.asarray(self.means, dtype=float)
            self.variances = np.asarray(self.variances, dtype=float)
            if np.any(self.variances <= 0):
                raise InvalidInputError("variances must be positive")
        else:
            raise InvalidInputError(f"unknown emission kind {self.kind!r}")

    @property
    def n_states(self) -> int:
        return len(self.init)

    def to_dict(self) -> dict:
        out = {"init": self.init.tolist(), "trans": self.trans.tolist(),
               "kind": self.kind}
        if self.kind == "bernoulli":
            out["emit_p"] = self.emit_p.tolist()
        else:
            out["means"] = self.means.tolist()
            out["variances"] = self.variances.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "HmmParams":
        kw = {k: d.get(k) for k in ("init", "trans", "kind", "emit_p", "means", "variances")}
        return cls(**{k: v for k, v in kw.items() if v is not None})


def _log_obs(obs: np.ndarray, params: HmmParams) -> np.ndarray:
    """(n, m) matrix of log emission densities."""
    obs = np.asarray(obs, dtype=float)
    if params.kind == "bernoulli":
        p = np.clip(params.emit_p, 1e-300, 1.0)
        q = np.clip(1.0 - params.emit_p, 1e-300, 1.0)
        logb = obs[:, None] * np.log(p)[None, :] + (1 - obs[:, None]) * np.log(q)[None, :]
        impossible = ((obs[:, None] == 1) & (params.emit_p[None, :] == 0)) | \
                     ((obs[:, None] == 0) & (params.emit_p[None, :] == 1))
        logb = np.where(impossible, -np.inf, logb)
    else:
        var = params.variances
        logb = -0.5 * (np.log(2 * np.pi * var)[None, :]
                       + (obs[:, None] - params.means[None, :]) ** 2 / var[None, :])
    if np.any(np.all(np.isneginf(logb), axis=1)):
        raise ImpossibleObservationError("an observation is impossible under every state")
    return logb


def viterbi(obs, params: HmmParams) -> np.ndarray:
    """Max-probability state path (0-indexed); ties go to the lower state."""
    logb = _log_obs(obs, params)
    n, m = logb.shape
    with np.errstate(divide="ignore"):
        log_a = np.log(params.trans)
        delta = np.log(params.init) + logb[0]
    back = np.zeros((n, m), dtype=np.int64)
    for t in range(1, n):
        cand = delta[:, None] + log_a  # (from, to)
        back[t] = np.argmax(cand, axis=0)  # first max -> lower state on ties
        delta = cand[back[t], np.arange(m)] + logb[t]
    path = np.empty(n, dtype=np.int64)
    path[-1] = int(np.argmax(delta))
    for t in range(n - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def forward_backward(obs, params: HmmParams):
    """Scaled forward/backward pass.

    Returns ``(posteriors, loglik)`` where posteriors has shape (n, m) with
    rows summing to 1.
    """
    logb = _log_obs(obs, params)
    b = np.exp(logb - logb.max(axis=1, keepdims=True))
    shift = logb.max(axis=1)
    n, m = b.shape
    a = params.trans
    alpha = np.zeros((n, m))
    scale = np.zeros(n)
    alpha[0] = params.init * b[0]
    scale[0] = alpha[0].sum()
    if scale[0] == 0:
        raise ImpossibleObservationError("zero forward mass at t=0")
    alpha[0] /= scale[0]
    for t in range(1, n):
        alpha[t] = (alpha[t - 1] @ a) * b[t]
        scale[t] = alpha[t].sum()
        if scale[t] == 0:
            raise ImpossibleObservationError(f"zero forward mass at t={t}")
        alpha[t] /= scale[t]
    beta = np.ones((n, m))
    for t in range(n - 2, -1, -1):
        beta[t] = (a @ (b[t + 1] * beta[t + 1])) / scale[t + 1]
    post = alpha * beta
    post /= post.sum(axis=1, keepdims=True)
    loglik = float(np.sum(np.log(scale)) + np.sum(shift))
    return post, loglik


def log_likelihood(obs, params: HmmParams) -> float:
    return forward_backward(obs, params)[1]


def _em_step(obs, params: HmmParams):
    """One Baum-Welch update; returns (new_params, loglik of old params)."""
    obs = np.asarray(obs, dtype=float)
    logb = _log_obs(obs, params)
    b = np.exp(logb - logb.max(axis=1, keepdims=True))
    n, m = b.shape
    a = params.trans
    alpha = np.zeros((n, m))
    scale = np.zeros(n)
    alpha[0] = params.init * b[0]
    scale[0] = alpha[0].sum()
    alpha[0] /= scale[0]
    for t in range(1, n):
        alpha[t] = (alpha[t - 1] @ a) * b[t]
        scale[t] = alpha[t].sum()
        alpha[t] /= scale[t]
    beta = np.ones((n, m))
    for t in range(n - 2, -1, -1):
        beta[t] = (a @ (b[t + 1] * beta[t + 1])) / scale[t + 1]
    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    # xi sums: expected transition counts
    xi_sum = np.zeros((m, m))
    for t in range(n - 1):
        xi = (alpha[t][:, None] * a) * (b[t + 1] * beta[t + 1])[None, :] / scale[t + 1]
        xi_sum += xi
    loglik = float(np.sum(np.log(scale)) + np.sum(logb.max(axis=1)))

    new_init = gamma[0] / gamma[0].sum()
    new_trans = xi_sum / np.maximum(xi_sum.sum(axis=1, keepdims=True), 1e-300)
    new_trans /= new_trans.sum(axis=1, keepdims=True)
    gsum = gamma.sum(axis=0)
    floored = False
    if params.kind == "bernoulli":
        p = (gamma * obs[:, None]).sum(axis=0) / gsum
        new = HmmParams(new_init, new_trans, "bernoulli", emit_p=np.clip(p, 0.0, 1.0))
    else:
        means = (gamma * obs[:, None]).sum(axis=0) / gsum
        var = (gamma * (obs[:, None] - means[None, :]) ** 2).sum(axis=0) / gsum
        if np.any(var < VAR_FLOOR):
            var = np.maximum(var, VAR_FLOOR)
            floored = True
        new = HmmParams(new_init, new_trans, "gaussian", means=means, variances=var,
                        variance_floored=floored)
    return new, loglik


def _random_init(obs, m, kind, rng) -> HmmParams:
    init = rng.dirichlet(np.ones(m))
    trans = rng.dirichlet(np.ones(m), size=m)
    if kind == "bernoulli":
        return HmmParams(init, trans, "bernoulli", emit_p=rng.uniform(0.05, 0.95, size=m))
    obs = np.asarray(obs, dtype=float)
    means = rng.normal(np.mean(obs), np.std(obs) + 1e-12, size=m)
    variances = np.full(m, max(np.var(obs), VAR_FLOOR)) * rng.uniform(0.5, 1.5, size=m)
    return HmmParams(init, trans, "gaussian", means=means, variances=variances)


def baum_welch(obs, m: int, kind: str = "bernoulli", n_restarts: int = 10,
               max_iters: int = 500, tol: float = 1e-6, seed: int = 0,
               init_params: HmmParams | None = None):
    """EM fitting with seeded random restarts; keeps the best log-likelihood.

    Returns ``(params, loglik_trace)`` for the winning restart.  The trace is
    nondecreasing (within numerical tolerance) by EM monotonicity.
    """
    if m < 1:
        raise InvalidInputError("need at least one state")
    rng = np.random.default_rng(seed)
    best = None
    starts = [init_params] if init_params is not None else \
        [_random_init(obs, m, kind, rng) for _ in range(n_restarts)]
    for params in starts:
        trace = []
        prev = -np.inf
        for _ in range(max_iters):
            params_new, ll = _em_step(obs, params)
            trace.append(ll)
            if ll - prev < tol and np.isfinite(prev):
                params = params_new
                break
            prev = ll
            params = params_new
        final_ll = log_likelihood(obs, params)
        trace.append(final_ll)
        if best is None or final_ll > best[2]:
            best = (params, trace, final_ll)
    return best[0], best[1]


def decoding_error_rate(truth, decoded) -> float:
    """Mismatch fraction minimized over bijective relabelings of state ids."""
    truth = np.asarray(truth)
    decoded = np.asarray(decoded)
    if truth.shape != decoded.shape:
        raise InvalidInputError("state paths must have equal length")
    t_labels = np.unique(truth)
    d_labels = np.unique(decoded)
    if len(d_labels) > len(t_labels):
        # pad truth label set so every decoded label can map somewhere
        extra = [l for l in d_labels if l not in t_labels]
        t_labels = np.concatenate([t_labels, extra[:len(d_labels) - len(t_labels)]])
    n = len(truth)
    # confusion counts decoded-label x truth-label
    best = n
    for perm in itertools.permutations(t_labels, len(d_labels)):
        mapping = dict(zip(d_labels, perm))
        mismatch = int(np.sum(truth != np.vectorize(mapping.get)(decoded)))
        best = min(best, mismatch)
    return best / n


def brute_force_best_path(obs, params: HmmParams) -> np.ndarray:
    """Exhaustive joint-probability argmax over all state paths (test oracle)."""
    logb = _log_obs(obs, params)
    n, m = logb.shape
    with np.errstate(divide="ignore"):
        log_a = np.log(params.trans)
        log_init = np.log(params.init)
    best_path, best_lp = None, -np.inf
    for path in itertools.product(range(m), repeat=n):
        lp = log_init[path[0]] + logb[0, path[0]]
        for t in range(1, n):
            lp += log_a[path[t - 1], path[t]] + logb[t, path[t]]
        if lp > best_lp:
            best_lp, best_path = lp, path
    return np.asarray(best_path)


def brute_force_log_likelihood(obs, params: HmmParams) -> float:
    """Exhaustive path-sum log-likelihood (test oracle)."""
    logb = _log_obs(obs, params)
    n, m = logb.shape
    with np.errstate(divide="ignore"):
        log_a = np.log(params.trans)
        log_init = np.log(params.init)
    total = []
    for path in itertools.product(range(m), repeat=n):
        lp = log_init[path[0]] + logb[0, path[0]]
        for t in range(1, n):
            lp += log_a[path[t - 1], path[t]] + logb[t, path[t]]
        total.append(lp)
    total = np.asarray(total)
    mx = total.max()
    return float(mx + np.log(np.sum(np.exp(total - mx))))
