"""HMM baselines: exact decoding, smoothing, and EM fitting."""

import numpy as np
import pytest

from volstates.errors import InvalidInputError
from volstates.hmm import (HmmParams, ImpossibleObservationError, baum_welch,
                           brute_force_best_path, brute_force_log_likelihood,
                           decoding_error_rate, forward_backward,
                           log_likelihood, viterbi)


def _random_params(m, kind, rng):
    trans = rng.random((m, m)) + 0.2
    trans /= trans.sum(axis=1, keepdims=True)
    init = rng.random(m) + 0.2
    init /= init.sum()
    if kind == "bernoulli":
        return HmmParams(init, trans, kind="bernoulli",
                         emit_p=rng.random(m) * 0.8 + 0.1)
    return HmmParams(init, trans, kind="gaussian",
                     means=rng.normal(size=m),
                     variances=rng.random(m) + 0.3)


class TestViterbi:
    def test_single_state_constant(self):
        params = HmmParams([1.0], [[1.0]], kind="bernoulli", emit_p=[0.3])
        path = viterbi([0, 1, 0, 1, 1], params)
        np.testing.assert_array_equal(path, [0] * 5)

    def test_matches_exhaustive(self):
        rng = np.random.default_rng(14)
        for kind in ("bernoulli", "gaussian"):
            for m in (2, 3):
                params = _random_params(m, kind, rng)
                obs = rng.integers(0, 2, size=8).astype(float) if \
                    kind == "bernoulli" else rng.normal(size=8)
                np.testing.assert_array_equal(viterbi(obs, params),
                                              brute_force_best_path(obs, params))

    def test_impossible_observation(self):
        params = HmmParams([0.5, 0.5], [[0.9, 0.1], [0.1, 0.9]],
                           kind="bernoulli", emit_p=[0.0, 0.0])
        with pytest.raises(ImpossibleObservationError):
            viterbi([0, 1, 0], params)


class TestForwardBackward:
    def test_posteriors_normalized(self):
        rng = np.random.default_rng(15)
        params = _random_params(3, "gaussian", rng)
        post, ll = forward_backward(rng.normal(size=50), params)
        np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-12)
        assert np.isfinite(ll)

    def test_loglik_matches_exhaustive(self):
        rng = np.random.default_rng(16)
        for kind in ("bernoulli", "gaussian"):
            params = _random_params(2, kind, rng)
            obs = rng.integers(0, 2, size=6).astype(float) if \
                kind == "bernoulli" else rng.normal(size=6)
            assert log_likelihood(obs, params) == pytest.approx(
                brute_force_log_likelihood(obs, params), abs=1e-9)

    def test_long_series_no_underflow(self):
        rng = np.random.default_rng(17)
        params = _random_params(2, "gaussian", rng)
        ll = log_likelihood(rng.normal(size=10_000), params)
        assert np.isfinite(ll)


class TestBaumWelch:
    def test_trace_monotone(self):
        rng = np.random.default_rng(18)
        obs = rng.normal(size=300) * np.where(rng.random(300) < 0.5, 1.0, 3.0)
        _, trace = baum_welch(obs, 2, kind="gaussian", n_restarts=2,
                              max_iters=60, seed=0)
        diffs = np.diff(np.asarray(trace))
        assert np.all(diffs >= -1e-9)

    def test_init_at_truth_no_decrease(self):
        rng = np.random.default_rng(19)
        truth = HmmParams([0.5, 0.5], [[0.95, 0.05], [0.05, 0.95]],
                          kind="bernoulli", emit_p=[0.1, 0.6])
        states = [0]
        for _ in range(499):
            states.append(states[-1] if rng.random() > 0.05 else 1 - states[-1])
        obs = (rng.random(500) < np.where(np.array(states) == 0, 0.1, 0.6)
               ).astype(float)
        ll0 = log_likelihood(obs, truth)
        _, trace = baum_welch(obs, 2, kind="bernoulli", max_iters=3,
                              init_params=truth)
        assert trace[0] >= ll0 - 1e-9

    def test_variance_floor_flag(self):
        obs = np.zeros(40)
        params, _ = baum_welch(obs, 1, kind="gaussian", n_restarts=1,
                               max_iters=20, seed=0)
        assert params.variance_floored
        assert np.all(params.variances >= 1e-6)


class TestDecodingErrorRate:
    def test_identical(self):
        assert decoding_error_rate([1, 2, 1], [1, 2, 1]) == 0.0

    def test_label_swap(self):
        assert decoding_error_rate([1, 1, 2, 2], [2, 2, 1, 1]) == 0.0

    def test_hand_value(self):
        assert decoding_error_rate([1, 1, 2, 2], [1, 2, 2, 2]) == 0.25

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            decoding_error_rate([1, 2], [1, 2, 1])


class TestHmmParams:
    def test_row_stochastic_enforced(self):
        with pytest.raises(InvalidInputError):
            HmmParams([0.5, 0.5], [[0.9, 0.2], [0.1, 0.9]],
                      kind="bernoulli", emit_p=[0.1, 0.5])

    def test_json_round_trip(self):
        p = HmmParams([0.4, 0.6], [[0.8, 0.2], [0.3, 0.7]],
                      kind="gaussian", means=[0.0, 1.0], variances=[1.0, 2.0])
        q = HmmParams.from_dict(p.to_dict())
        np.testing.assert_allclose(q.trans, p.trans)
        np.testing.assert_allclose(q.means, p.means)
