"""Threshold-ladder aggregation and weighted clustering."""

import numpy as np
import pytest

from volstates.aggregation import (DEFAULT_LEVELS, ClusterResult,
                                   EmissionMatrix, ThresholdLadder,
                                   cluster_states, cut_tree, encode_decode,
                                   rank_features, segmentation_evidence,
                                   weighted_silhouette, weighted_ward_linkage)
from volstates.encoding import ExcursionProcess, ReturnSeries
from volstates.errors import InvalidInputError
from volstates.model_selection import LossConfig, optimize_theta


def _em_from_rows(rows):
    rows = np.asarray(rows, dtype=float)
    pis = tuple(-(i + 1.0) for i in range(rows.shape[0]))
    return EmissionMatrix(rows, ThresholdLadder(np.array(pis)))


class TestThresholdLadder:
    def test_from_quantiles(self):
        values = np.random.default_rng(0).normal(size=2000)
        ladder = ThresholdLadder.from_quantiles(values, DEFAULT_LEVELS)
        assert len(ladder) == len(DEFAULT_LEVELS)
        assert len(np.unique(ladder.pis)) == len(ladder)

    def test_sign_inconsistent_levels_dropped(self):
        # On all-positive data, low quantiles are positive values that a
        # lower-tail level cannot legitimately produce; they must be dropped.
        values = np.random.default_rng(1).random(500) + 5.0
        ladder = ThresholdLadder.from_quantiles(values, (0.9, 0.1))
        assert len(ladder) >= 1
        assert np.all(ladder.pis != 0)


class TestEncodeDecode:
    def test_iid_rows_nearly_constant(self):
        values = np.random.default_rng(2).normal(size=1500)
        rs = ReturnSeries.from_values(values)
        ladder = ThresholdLadder.from_quantiles(values, (0.9, 0.8, 0.2, 0.1))
        em = encode_decode(rs, ladder, LossConfig(k=float(np.log(1500)), m=2),
                           screen=True)
        # with screening, homogeneous data decodes to constant rows
        for row in em.values:
            assert len(np.unique(row)) == 1

    def test_level_shift_detected(self):
        rng = np.random.default_rng(3)
        values = np.concatenate([rng.standard_t(2, 1000),
                                 rng.standard_t(5, 1000)])
        rs = ReturnSeries.from_values(values)
        ladder = ThresholdLadder.from_quantiles(values, DEFAULT_LEVELS)
        em = encode_decode(rs, ladder, LossConfig(k=2.0, m=2))
        assert any(len(np.unique(row)) > 1 for row in em.values)

    def test_rows_piecewise_constant(self):
        rng = np.random.default_rng(4)
        values = np.concatenate([rng.normal(0, 1, 400),
                                 rng.normal(0, 4, 400)])
        rs = ReturnSeries.from_values(values)
        ladder = ThresholdLadder.from_quantiles(values, (0.9, 0.1))
        em = encode_decode(rs, ladder, LossConfig(k=2.0, m=2))
        for row in em.values:
            assert len(np.unique(row)) <= 4  # few constant pieces per decode


class TestSegmentationEvidence:
    def test_positive_on_structure(self):
        rng = np.random.default_rng(5)
        bits = np.concatenate([(rng.random(400) < 0.5).astype(int),
                               (rng.random(400) < 0.02).astype(int)])
        x = ExcursionProcess(bits=bits)
        res = optimize_theta(x, LossConfig(k=2.0, m=2), keep_trace=False)
        assert segmentation_evidence(x, res.best_assignment) > 0

    def test_single_state_zero(self):
        bits = (np.random.default_rng(6).random(300) < 0.2).astype(int)
        x = ExcursionProcess(bits=bits)
        res = optimize_theta(x, LossConfig(k=float(np.log(300)), m=2),
                             keep_trace=False)
        if res.best_assignment.num_alternations == 1:
            assert segmentation_evidence(x, res.best_assignment) == \
                pytest.approx(0.0, abs=1e-9)


class TestClusterStates:
    def test_separable_duplicates_exact(self):
        a = np.array([0.1, 0.2, 0.3])
        b = np.array([0.7, 0.8, 0.9])
        rows = np.column_stack([a] * 50 + [b] * 50)
        em = _em_from_rows(rows)
        res = cluster_states(em, k=2)
        assert res.k == 2
        assert len(np.unique(res.labels[:50])) == 1
        assert len(np.unique(res.labels[50:])) == 1
        assert res.labels[0] != res.labels[-1]

    def test_identical_columns_degenerate(self):
        rows = np.full((3, 40), 0.25)
        res = cluster_states(_em_from_rows(rows))
        assert res.k == 1
        assert res.degenerate

    def test_silhouette_selects_two(self):
        a, b = np.array([0.05, 0.1]), np.array([0.6, 0.9])
        rows = np.column_stack([a] * 30 + [b] * 30)
        res = cluster_states(_em_from_rows(rows), k=None)
        assert res.k == 2

    def test_dedup_invariance(self):
        rng = np.random.default_rng(7)
        base = rng.random((4, 6))
        cols = base[:, rng.integers(0, 6, size=120)]
        res = cluster_states(_em_from_rows(cols), k=3)
        # identical columns always land in the same cluster
        for j in range(6):
            mask = np.all(cols == base[:, [j]], axis=0)
            if mask.any():
                assert len(np.unique(res.labels[mask])) == 1

    def test_refined_equals_or_improves_inertia(self):
        rng = np.random.default_rng(8)
        rows = np.column_stack([rng.random(3) for _ in range(9)]
                               )[:, rng.integers(0, 9, size=200)]
        em = _em_from_rows(rows)
        def inertia(res):
            total = 0.0
            pts = em.values.T
            for c in range(1, res.k + 1):
                sel = pts[res.labels == c]
                total += np.sum((sel - sel.mean(axis=0)) ** 2)
            return total
        plain = cluster_states(em, k=3)
        refined = cluster_states(em, k=3, refine=True)
        assert inertia(refined) <= inertia(plain) + 1e-9


class TestWardMachinery:
    def test_merge_heights_nondecreasing(self):
        rng = np.random.default_rng(9)
        pts = rng.random((12, 3))
        w = rng.integers(1, 10, size=12).astype(float)
        link = weighted_ward_linkage(pts, w)
        heights = link[:, 2]
        assert np.all(np.diff(heights) >= -1e-12)

    def test_cut_tree_partition(self):
        rng = np.random.default_rng(10)
        pts = rng.random((10, 2))
        link = weighted_ward_linkage(pts, np.ones(10))
        for k in (1, 2, 4):
            labels = cut_tree(link, 10, k)
            assert len(np.unique(labels)) == k

    def test_weighted_silhouette_range(self):
        pts = np.array([[0.0], [0.1], [5.0], [5.1]])
        d = np.abs(pts - pts.T)
        s = weighted_silhouette(d, np.array([0, 0, 1, 1]), np.ones(4))
        assert 0.5 < s <= 1.0


class TestRankFeatures:
    def test_constant_rows_centered(self):
        rows = np.array([[0.3, 0.3, 0.3], [0.1, 0.5, 0.9]])
        ranked = rank_features(rows)
        np.testing.assert_allclose(ranked[0], 0.5)
        np.testing.assert_allclose(ranked[1], [0.0, 0.5, 1.0])

    def test_range(self):
        rows = np.random.default_rng(11).random((5, 40))
        ranked = rank_features(rows)
        assert ranked.min() >= 0.0 and ranked.max() <= 1.0


class TestEmissionMatrix:
    def test_validation(self):
        ladder = ThresholdLadder(np.array([-1.0, 1.0]))
        with pytest.raises(InvalidInputError):
            EmissionMatrix(np.array([[0.5, 1.5]]), ladder)

    def test_lower_tail_cdf_flips_upper_rows(self):
        ladder = ThresholdLadder(np.array([1.0, -1.0]))
        em = EmissionMatrix(np.array([[0.1, 0.1], [0.2, 0.2]]), ladder)
        thr, cdf = em.lower_tail_cdf()
        np.testing.assert_allclose(thr, [-1.0, 1.0])
        np.testing.assert_allclose(cdf[0], [0.2, 0.2])   # lower tail kept
        np.testing.assert_allclose(cdf[1], [0.9, 0.9])   # upper tail flipped
