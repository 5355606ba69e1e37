import math

import numpy as np
import pytest
from scipy import integrate

from src.errors import DomainError
from src.models.cdf_engine import (
    IntegrandKind,
    IteratedCdf,
    LogIntegrand,
    apply_operator,
    cdf_breakpoints,
    cdf_eval,
    log_affine_integral,
    monotone_start_check,
    stieltjes_log_integral,
    stieltjes_log_integrals,
)
from src.models.ifs_core import apply_map, enumerate_words, fixed_point_m, word_matrix

BRACKET_ALPHAS = [0.2, 0.2688, 0.2689, 0.3, 0.45]


def f0(alpha):
    m = fixed_point_m(alpha)
    return lambda s: np.clip(np.asarray(s, dtype=float) / m, 0.0, 1.0)


class TestLogAffineIntegral:
    @pytest.mark.parametrize("p,q", [(1.0, 2.0), (3.5, 1e-3), (1e-9, 0.7), (2.0, 0.0), (0.0, 0.4)])
    def test_matches_quadrature(self, p, q):
        length = 0.4
        expected, _ = integrate.quad(lambda t: math.log(p * t + q), 0.0, length, limit=200)
        assert abs(log_affine_integral(p, q, length) - expected) < 1e-10

    def test_broadcasts(self):
        values = log_affine_integral(np.array([1.0, 2.0]), np.array([1.0, 1.0]), 1.0)
        assert values.shape == (2,)


class TestIntegrands:
    def test_named_integrands(self):
        assert LogIntegrand.lower().eps == 0.0
        assert LogIntegrand.upper().kind is IntegrandKind.UPPER

    def test_eps_out_of_range(self):
        with pytest.raises(DomainError):
            LogIntegrand.with_eps(1.5)

    def test_lower_and_upper_closed_forms(self):
        s = np.linspace(0.05, 0.4, 9)
        alpha = 0.3
        np.testing.assert_allclose(
            LogIntegrand.lower()(s, alpha), 0.5 * np.log((1 + s) * (1 + s + alpha)), rtol=1e-14
        )
        np.testing.assert_allclose(LogIntegrand.upper()(s, alpha), 0.5 * np.log(1 + alpha / s), rtol=1e-13)


class TestStieltjes:
    @pytest.mark.parametrize("integrand", [LogIntegrand.lower(), LogIntegrand.upper(), LogIntegrand.with_eps(0.3)])
    def test_matches_wordwise_quadrature(self, integrand):
        alpha = 0.3
        depth = 4
        m = fixed_point_m(alpha)
        total = 0.0
        for word in enumerate_words(depth):
            mat = word_matrix(word, alpha)
            value, _ = integrate.quad(lambda t: float(integrand(mat.apply(t), alpha)), 0.0, m, limit=200)
            total += value
        expected = total * 2.0 ** -depth / m
        f = IteratedCdf.create(alpha, depth)
        assert abs(stieltjes_log_integral(f, integrand) - expected) < 1e-8

    def test_matches_integration_by_parts(self):
        # int g dF = g(M) - int_0^M g'(s) F(s) ds
        alpha = 0.25
        f = IteratedCdf.create(alpha, 6)
        m = f.m_alpha
        g = LogIntegrand.lower()
        dg = lambda s: 0.5 * (1.0 / (1.0 + s) + 1.0 / (1.0 + s + alpha))
        inner, _ = integrate.quad(
            lambda s: dg(s) * cdf_eval(f, s), 0.0, m, points=cdf_breakpoints(f)[1:-1], limit=500
        )
        expected = float(g(m, alpha)) - inner
        assert abs(stieltjes_log_integral(f, g) - expected) < 1e-8

    def test_independent_of_threads_and_leaf_size(self):
        f = IteratedCdf.create(0.3, 12)
        integrands = [LogIntegrand.lower(), LogIntegrand.upper()]
        single = stieltjes_log_integrals(f, integrands, threads=1, leaf_depth=12)
        threaded = stieltjes_log_integrals(f, integrands, threads=4, leaf_depth=5)
        assert np.all(np.abs(single - threaded) < 1e-13)
        again = stieltjes_log_integrals(f, integrands, threads=3, leaf_depth=5)
        np.testing.assert_array_equal(threaded, again)

    def test_lower_below_upper(self):
        lower, upper = stieltjes_log_integrals(
            IteratedCdf.create(0.3, 10), [LogIntegrand.lower(), LogIntegrand.upper()]
        )
        assert lower < upper


class TestCdfEval:
    def test_depth_zero_is_uniform(self):
        alpha = 0.3
        s = np.linspace(0.0, fixed_point_m(alpha), 11)
        np.testing.assert_allclose(cdf_eval(IteratedCdf.create(alpha, 0), s), f0(alpha)(s), atol=1e-15)

    def test_boundary_values(self):
        f = IteratedCdf.create(0.3, 7)
        assert cdf_eval(f, -0.1) == 0.0
        assert cdf_eval(f, 0.0) == 0.0
        assert cdf_eval(f, f.m_alpha) == 1.0
        assert cdf_eval(f, 2.0) == 1.0
        assert isinstance(cdf_eval(f, 0.2), float)

    def test_first_iterate_at_cylinder_end(self):
        for alpha in (0.2, 0.3, 0.45):
            m = fixed_point_m(alpha)
            value = cdf_eval(IteratedCdf.create(alpha, 1), apply_map(0.0, m))
            assert abs(value - (1.0 - alpha / (2.0 * m))) < 1e-10

    def test_matches_operator_recursion(self):
        alpha = 0.3
        s = np.linspace(0.0, fixed_point_m(alpha), 301)
        previous = f0(alpha)
        for depth in range(1, 5):
            step = previous
            previous = lambda x, step=step: apply_operator(step, alpha, x)
            np.testing.assert_allclose(
                cdf_eval(IteratedCdf.create(alpha, depth), s), previous(s), atol=1e-12
            )

    @pytest.mark.parametrize("alpha", BRACKET_ALPHAS)
    def test_iterates_decrease(self, alpha):
        s = np.linspace(0.0, fixed_point_m(alpha), 1000)
        previous = cdf_eval(IteratedCdf.create(alpha, 0), s)
        for depth in range(1, 11):
            current = cdf_eval(IteratedCdf.create(alpha, depth), s)
            assert np.all(current <= previous + 1e-12)
            assert np.all(np.diff(current) >= -1e-12)
            previous = current

    def test_threads_give_identical_values(self):
        f = IteratedCdf.create(0.3, 10)
        s = np.linspace(0.0, f.m_alpha, 257)
        np.testing.assert_array_equal(cdf_eval(f, s, threads=1), cdf_eval(f, s, threads=4))

    def test_breakpoints_sorted_within_support(self):
        f = IteratedCdf.create(0.35, 5)
        points = cdf_breakpoints(f)
        assert points[0] == 0.0
        assert abs(points[-1] - f.m_alpha) < 1e-14
        assert np.all(np.diff(points) > 0)

    def test_negative_depth_rejected(self):
        with pytest.raises(DomainError):
            IteratedCdf.create(0.3, -1)


class TestStartCheck:
    def test_threshold(self):
        assert monotone_start_check(0.1) is False
        assert monotone_start_check(0.2) is True
        assert monotone_start_check(1.0 / 6.0) is True
        assert monotone_start_check(0.16) is False
