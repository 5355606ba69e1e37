import math

import numpy as np
import pytest
from scipy import optimize

from src.errors import DomainError
from src.models.ifs_core import (
    IfsParams,
    Mat2,
    SupportType,
    Symbol,
    Word,
    apply_map,
    compose_maps,
    cylinder_interval,
    cylinder_length,
    enumerate_words,
    evaluate_cf,
    fixed_point_m,
    gap,
    iter_word_blocks,
    leaf_matrices,
    sample_mu,
    support_type,
    word_matrix,
)


def nested(word_bits, alpha, s):
    """T_{x_1}(T_{x_2}(... T_{x_n}(s))) by direct composition."""
    value = s
    for bit in reversed(word_bits):
        value = apply_map(alpha * bit, value)
    return value


class TestFixedPoint:
    def test_closed_form_anchors(self):
        assert abs(fixed_point_m(0.5) - 0.5) < 1e-10
        assert abs(fixed_point_m(1.0 / 6.0) - 1.0 / 3.0) < 1e-10

    def test_is_fixed_point_of_t_alpha(self):
        for alpha in (0.01, 0.2, 0.2689, 0.7, 3.0):
            m = fixed_point_m(alpha)
            assert 0.0 < m < 1.0
            assert abs(apply_map(alpha, m) - m) < 1e-14

    @pytest.mark.parametrize("alpha", [0.0, -0.1])
    def test_rejects_non_positive_alpha(self, alpha):
        with pytest.raises(DomainError):
            fixed_point_m(alpha)

    def test_params_validate_m(self):
        assert IfsParams.from_alpha(0.3).m_alpha == fixed_point_m(0.3)
        with pytest.raises(DomainError):
            IfsParams(alpha=0.3, m_alpha=0.5)


class TestSupport:
    def test_gap_vanishes_at_one_half(self):
        assert abs(gap(0.5)) < 1e-12

    def test_support_type(self):
        kind, g = support_type(0.6)
        assert kind is SupportType.CANTOR and g > 0
        kind, g = support_type(0.3)
        assert kind is SupportType.INTERVAL and g <= 0


class TestWords:
    def test_symbol_values(self):
        assert Symbol.ZERO.value(0.4) == 0.0
        assert Symbol.ALPHA.value(0.4) == 0.4

    def test_matrix_product_matches_nested_maps(self, rng):
        alpha = 0.2689
        for _ in range(50):
            bits = rng.integers(0, 2, size=rng.integers(1, 30))
            s = rng.random() * fixed_point_m(alpha)
            word = Word.from_bits(bits)
            assert abs(evaluate_cf(word, alpha, s) - nested(bits, alpha, s)) < 1e-12

    def test_word_matrices_are_unimodular(self, rng):
        bits = rng.integers(0, 2, size=12)
        mat = word_matrix(Word.from_bits(bits), 0.3)
        assert abs(mat.det - 1.0) < 1e-9

    def test_empty_word_is_identity(self):
        assert word_matrix(Word(), 0.3) == Mat2.identity()
        assert evaluate_cf(Word(), 0.3, 0.123) == 0.123

    def test_inverse_apply(self):
        mat = word_matrix(Word.from_bits([1, 0, 1]), 0.4)
        assert abs(mat.inverse_apply(mat.apply(0.2)) - 0.2) < 1e-12

    def test_cylinder_interval_is_image_of_support(self):
        alpha = 0.35
        bits = [0, 1, 1, 0]
        m = fixed_point_m(alpha)
        lo, hi = cylinder_interval(Word.from_bits(bits), alpha)
        assert abs(lo - nested(bits, alpha, 0.0)) < 1e-14
        assert abs(hi - nested(bits, alpha, m)) < 1e-14
        assert abs(cylinder_length(Word.from_bits(bits), alpha) - (hi - lo)) < 1e-14

    def test_enumerate_words_lexicographic(self):
        words = list(enumerate_words(3))
        assert len(words) == 8
        assert words[0].symbols == (Symbol.ZERO,) * 3
        assert words[1].symbols == (Symbol.ZERO, Symbol.ZERO, Symbol.ALPHA)
        assert words[-1].symbols == (Symbol.ALPHA,) * 3

    @pytest.mark.parametrize("leaf_depth", [None, 0, 3, 6])
    def test_word_blocks_match_word_matrices(self, leaf_depth):
        alpha = 0.3
        depth = 6
        blocks = list(iter_word_blocks(depth, alpha, leaf_depth))
        a = np.concatenate([block.a for block in blocks])
        b = np.concatenate([block.b for block in blocks])
        c = np.concatenate([block.c for block in blocks])
        d = np.concatenate([block.d for block in blocks])
        expected = [word_matrix(word, alpha) for word in enumerate_words(depth)]
        assert len(a) == 2 ** depth
        np.testing.assert_allclose(a, [m.a for m in expected], rtol=1e-13)
        np.testing.assert_allclose(b, [m.b for m in expected], rtol=1e-13)
        np.testing.assert_allclose(c, [m.c for m in expected], rtol=1e-13)
        np.testing.assert_allclose(d, [m.d for m in expected], rtol=1e-13)

    def test_leaf_matrices_depth_zero(self):
        a, b, c, d = leaf_matrices(0, 0.3)
        assert (a[0], b[0], c[0], d[0]) == (1.0, 0.0, 0.0, 1.0)


class TestInvariants:
    def test_determinant_one_for_random_words(self, rng):
        for _ in range(200):
            alpha = float(rng.uniform(0.05, 1.0))
            mat = word_matrix(Word.from_bits(rng.integers(0, 2, size=rng.integers(1, 31))), alpha)
            assert min(mat.a, mat.b, mat.c, mat.d) >= 0.0
            assert abs(mat.det - 1.0) <= 1e-9 * max(1.0, mat.a * mat.d)

    def test_increasing_in_s(self, rng):
        alpha = 0.3
        m = fixed_point_m(alpha)
        for _ in range(100):
            word = Word.from_bits(rng.integers(0, 2, size=rng.integers(1, 20)))
            s1, s2 = np.sort(rng.random(2) * m)
            if s1 < s2:
                assert evaluate_cf(word, alpha, s1) < evaluate_cf(word, alpha, s2)

    def test_increasing_in_each_shift(self, rng):
        alpha = 0.3
        for _ in range(100):
            n = int(rng.integers(1, 15))
            shifts = alpha * rng.integers(0, 2, size=n)
            s = rng.random() * fixed_point_m(alpha)
            base = compose_maps(shifts, s)[0]
            for i in range(n):
                bumped = shifts.copy()
                bumped[i] += 1e-3
                assert compose_maps(bumped, s)[0] > base

    @pytest.mark.parametrize("alpha", [0.2, 0.5, 0.6])
    def test_cylinders_nest(self, rng, alpha):
        for _ in range(100):
            word = Word.from_bits(rng.integers(0, 2, size=rng.integers(0, 20)))
            lo, hi = cylinder_interval(word, alpha)
            for symbol in Symbol:
                child_lo, child_hi = cylinder_interval(word.extend(symbol), alpha)
                assert lo - 1e-14 <= child_lo <= child_hi <= hi + 1e-14

    @pytest.mark.parametrize("alpha", [0.1, 0.2689, 0.6, 2.0])
    def test_cylinder_length_at_most_one_over_n(self, alpha):
        for depth in range(1, 11):
            for word in enumerate_words(depth):
                assert cylinder_length(word, alpha) <= 1.0 / depth + 1e-15

    def test_gap_changes_sign_at_one_half(self):
        root = optimize.bisect(gap, 0.3, 0.7, xtol=1e-15)
        assert abs(root - 0.5) < 1e-12


class TestSampling:
    def test_compose_maps_matches_nested(self, rng):
        alpha = 0.45
        bits = rng.integers(0, 2, size=(20, 15))
        values = compose_maps(alpha * bits, 0.1)
        for row, value in zip(bits, values):
            assert abs(value - nested(row, alpha, 0.1)) < 1e-13

    def test_single_draw_is_float(self, rng):
        value = sample_mu(0.3, 20, rng)
        assert isinstance(value, float)
        assert 0.0 <= value <= fixed_point_m(0.3)

    def test_draws_lie_in_support(self, rng):
        values = sample_mu(0.3, 25, rng, size=10000)
        assert values.shape == (10000,)
        assert values.min() >= 0.0
        assert values.max() <= fixed_point_m(0.3)

    def test_rejects_zero_depth(self, rng):
        with pytest.raises(DomainError):
            sample_mu(0.3, 0, rng)

    def test_reproducible_for_same_stream(self, make_rng):
        np.testing.assert_array_equal(
            sample_mu(0.3, 10, make_rng(5), size=100), sample_mu(0.3, 10, make_rng(5), size=100)
        )

    def test_depth_five_cylinders_carry_equal_mass(self, rng):
        # Cylinders are disjoint and ordered like words for alpha > 1/2.
        alpha = 0.6
        samples = 200_000
        values = sample_mu(alpha, 20, rng, size=samples)
        lefts = np.array([cylinder_interval(word, alpha)[0] for word in enumerate_words(5)])
        assert np.all(np.diff(lefts) > 0)
        counts = np.bincount(np.searchsorted(lefts, values, side="right") - 1, minlength=32)
        p = 2.0 ** -5
        stderr = math.sqrt(samples * p * (1 - p))
        assert np.all(np.abs(counts - samples * p) < 4 * stderr)

    def test_central_gap_is_empty_for_cantor_support(self, rng):
        alpha = 0.6
        values = sample_mu(alpha, 30, rng, size=100_000)
        left = apply_map(0.0, fixed_point_m(alpha))
        right = apply_map(alpha, 0.0)
        assert not np.any((values > left) & (values < right))
