"""Distance functions, the expansion identity, and score-part ablations."""

import numpy as np
import pytest

from transcompat.scoring import (
    ScoreBreakdown,
    dist_breakdown,
    dist_euclid,
    dist_masked,
    dist_translation,
    score_inner,
    score_part,
    score_translation,
)


class TestTranslationDistance:
    def test_hand_computed_value(self):
        """x=(0.6,0.8), y=(1,0), r=(0.2,-1): residual (-0.2,-0.2), distance 0.08."""
        d = dist_translation([0.6, 0.8], [1.0, 0.0], [0.2, -1.0])
        np.testing.assert_allclose(d, 0.08, rtol=0, atol=1e-15)

    def test_perfect_translation_is_zero(self):
        x = np.array([1.0, 2.0, 3.0])
        r = np.array([0.5, -0.5, 0.25])
        assert dist_translation(x, x + r, r) == 0.0

    def test_breakdown_matches_hand_terms(self):
        b = dist_breakdown([0.6, 0.8], [1.0, 0.0], [0.2, -1.0])
        np.testing.assert_allclose(b.total, 0.08, atol=1e-15)
        np.testing.assert_allclose(b.norm_term, 3.04, atol=1e-15)
        np.testing.assert_allclose(b.global_term, -1.2, atol=1e-15)
        np.testing.assert_allclose(b.category_term, -1.76, atol=1e-15)
        np.testing.assert_allclose(b.recomposed, b.total, atol=1e-15)

    def test_expansion_identity_random(self):
        """Direct residual norm equals the three-term expansion to 1e-9 relative."""
        rng = np.random.default_rng(0)
        for _ in range(1000):
            dim = int(rng.integers(2, 65))
            x, y, r = rng.standard_normal((3, dim))
            b = dist_breakdown(x, y, r)
            denom = max(abs(b.total), 1.0)
            assert abs(b.total - b.recomposed) / denom <= 1e-9

    def test_batch_rows_match_singles(self):
        rng = np.random.default_rng(1)
        X, Y, R = rng.standard_normal((3, 50, 8))
        batch = dist_translation(X, Y, R)
        for i in range(50):
            np.testing.assert_allclose(batch[i], dist_translation(X[i], Y[i], R[i]), rtol=1e-14)

    def test_score_is_negated_distance(self):
        rng = np.random.default_rng(2)
        x, y, r = rng.standard_normal((3, 6))
        assert score_translation(x, y, r) == -dist_translation(x, y, r)

    def test_inputs_not_mutated(self):
        rng = np.random.default_rng(3)
        x, y, r = rng.standard_normal((3, 6))
        copies = (x.copy(), y.copy(), r.copy())
        dist_breakdown(x, y, r)
        score_part(x, y, r, "all")
        dist_masked(x, y, r)
        for orig, cop in zip((x, y, r), copies):
            np.testing.assert_array_equal(orig, cop)


class TestOtherScores:
    def test_inner_product_value(self):
        np.testing.assert_allclose(score_inner([0.6, 0.8], [0.8, 0.6]), 0.96, atol=1e-15)

    def test_euclid_value(self):
        assert dist_euclid([1.0, 0.0], [0.0, 1.0]) == 2.0

    def test_masked_distance_value(self):
        """w=(1,0.5) on difference (1,2) gives ||(1,1)||^2 = 2."""
        d = dist_masked([1.0, 2.0], [0.0, 0.0], [1.0, 0.5])
        np.testing.assert_allclose(d, 2.0, atol=1e-15)

    def test_all_ones_mask_is_euclid(self):
        rng = np.random.default_rng(4)
        x, y = rng.standard_normal((2, 9))
        np.testing.assert_allclose(dist_masked(x, y, np.ones(9)), dist_euclid(x, y), rtol=1e-14)

    def test_zero_relation_reduces_to_euclid(self):
        rng = np.random.default_rng(5)
        x, y = rng.standard_normal((2, 7))
        np.testing.assert_allclose(dist_translation(x, y, np.zeros(7)), dist_euclid(x, y), rtol=1e-14)


class TestScoreParts:
    def test_parts_sum_to_total_up_to_norms(self):
        """part scores negate expansion terms: global + category = norm_term - total."""
        rng = np.random.default_rng(6)
        x, y, r = rng.standard_normal((3, 12))
        b = dist_breakdown(x, y, r)
        np.testing.assert_allclose(score_part(x, y, r, "global"), -b.global_term, rtol=1e-12)
        np.testing.assert_allclose(score_part(x, y, r, "category"), -b.category_term, rtol=1e-12)
        np.testing.assert_allclose(score_part(x, y, r, "all"), -b.total, rtol=1e-12)

    def test_zero_relation_rankings_agree(self):
        """With r = 0 and unit-norm items, translation score ranks like inner product."""
        rng = np.random.default_rng(7)
        x = rng.standard_normal(8)
        x /= np.linalg.norm(x)
        cands = rng.standard_normal((30, 8))
        cands /= np.linalg.norm(cands, axis=1, keepdims=True)
        by_translation = np.argsort(score_translation(x, cands, np.zeros(8)))
        by_inner = np.argsort(score_inner(x, cands))
        np.testing.assert_array_equal(by_translation, by_inner)

    def test_unknown_part_rejected(self):
        with pytest.raises(ValueError, match="part"):
            score_part(np.ones(2), np.ones(2), np.ones(2), "local")

    def test_breakdown_is_frozen(self):
        b = ScoreBreakdown(1.0, 2.0, -0.5, -0.5)
        with pytest.raises(AttributeError):
            b.total = 3.0
