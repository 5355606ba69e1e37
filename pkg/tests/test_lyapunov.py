import math

import pytest

from src.errors import CertificationDomainError, DomainError, UndeterminedCertificationError
from src.models import lyapunov
from src.models.lyapunov import (
    HALF_LOG_2,
    LyapunovBracket,
    AlphaStatus,
    certify_alpha_c,
    classify_alpha,
    dimension_bound,
    lyapunov_bracket,
    lyapunov_eps,
    lyapunov_lower,
    lyapunov_mc,
    lyapunov_upper,
)

BRACKET_ALPHAS = [0.2, 0.2688, 0.2689, 0.3, 0.45]


class TestBrackets:
    @pytest.mark.parametrize("alpha", BRACKET_ALPHAS)
    def test_brackets_tighten_with_depth(self, alpha):
        previous = None
        for n in range(2, 15, 2):
            bracket = lyapunov_bracket(alpha, n)
            assert bracket.lower <= bracket.upper
            if previous is not None:
                assert bracket.lower >= previous.lower - 1e-12
                assert bracket.upper <= previous.upper + 1e-12
            previous = bracket

    @pytest.mark.slow
    @pytest.mark.parametrize("alpha", BRACKET_ALPHAS)
    def test_brackets_tighten_up_to_depth_twenty(self, alpha):
        lowers = [lyapunov_lower(alpha, n) for n in (16, 18, 20)]
        uppers = [lyapunov_upper(alpha, n) for n in (16, 18, 20)]
        assert lowers == sorted(lowers)
        assert uppers == sorted(uppers, reverse=True)
        assert lowers[-1] <= uppers[-1]

    @pytest.mark.parametrize("n", [4, 8, 12])
    @pytest.mark.parametrize("alpha_1,alpha_2", [(0.2, 0.2688), (0.2688, 0.2689), (0.2689, 0.3), (0.3, 0.45), (0.2, 0.45)])
    def test_lower_bound_below_upper_bound_of_larger_alpha(self, alpha_1, alpha_2, n):
        assert lyapunov_lower(alpha_1, n) <= lyapunov_upper(alpha_2, n)

    def test_bracket_matches_single_bounds(self):
        bracket = lyapunov_bracket(0.3, 10)
        assert bracket.lower == lyapunov_lower(0.3, 10)
        assert bracket.upper == lyapunov_upper(0.3, 10)
        assert bracket.contains(0.5 * (bracket.lower + bracket.upper))

    def test_eps_endpoints_reproduce_bounds(self):
        assert abs(lyapunov_eps(0.3, 0.0, 8) - lyapunov_lower(0.3, 8)) < 1e-13
        assert abs(lyapunov_eps(0.3, 1.0, 8) - lyapunov_upper(0.3, 8)) < 1e-13

    def test_rejects_alpha_below_sandwich_threshold(self):
        with pytest.raises(CertificationDomainError):
            lyapunov_lower(0.1, 6)
        with pytest.raises(CertificationDomainError):
            lyapunov_bracket(0.16, 6)

    def test_inverted_bracket_rejected(self):
        with pytest.raises(DomainError):
            LyapunovBracket(alpha=0.3, depth=4, lower=0.5, upper=0.4)

    def test_dimension_bound(self):
        assert abs(dimension_bound(HALF_LOG_2) - 1.0) < 1e-15
        assert dimension_bound(0.4) < 1.0
        with pytest.raises(DomainError):
            dimension_bound(0.0)


class TestMonteCarlo:
    @pytest.mark.parametrize("alpha", [0.2, 0.3])
    def test_estimate_inside_certified_bracket(self, alpha, make_rng):
        bracket = lyapunov_bracket(alpha, 16)
        mean, stderr = lyapunov_mc(alpha, steps=2000, trials=400, rng=make_rng(1))
        assert bracket.certified_lower - 3 * stderr <= mean <= bracket.certified_upper + 3 * stderr

    def test_zero_shift_only(self, rng):
        mean, stderr = lyapunov_mc(0.3, steps=10000, trials=4, rng=rng, prob_alpha=0.0)
        assert 0.0 < mean < 1e-3
        assert stderr == 0.0

    def test_single_trial_has_nan_stderr(self, rng):
        _, stderr = lyapunov_mc(0.3, steps=10, trials=1, rng=rng)
        assert math.isnan(stderr)

    def test_rejects_empty_run(self, rng):
        with pytest.raises(DomainError):
            lyapunov_mc(0.3, steps=0, trials=5, rng=rng)


def fake_classifier(alpha_c, undetermined=0.0, calls=None):
    """Classify by comparison with alpha_c, undetermined within the given half-width."""

    def classify(alpha, max_depth=26, margin=1e-9, start_depth=10, depth_step=2, threads=1):
        if calls is not None:
            calls.append(alpha)
        if abs(alpha - alpha_c) <= undetermined:
            status, value = AlphaStatus.UNDETERMINED, HALF_LOG_2
        elif alpha < alpha_c:
            status, value = AlphaStatus.BELOW, HALF_LOG_2 - 0.01
        else:
            status, value = AlphaStatus.ABOVE, HALF_LOG_2 + 0.01
        return status, LyapunovBracket(alpha, max_depth, value - 1e-4, value + 1e-4, margin)

    return classify


class TestCertification:
    def test_bisection_and_outward_snapping(self, monkeypatch):
        monkeypatch.setattr(lyapunov, "classify_alpha", fake_classifier(0.268843))
        certificate = certify_alpha_c(0.17, 0.45)
        assert certificate.is_complete
        assert certificate.alpha_lo == pytest.approx(0.2688, abs=1e-12)
        assert certificate.alpha_hi == pytest.approx(0.2689, abs=1e-12)
        assert certificate.width < 2e-4

    def test_without_snapping_reaches_tolerance(self, monkeypatch):
        monkeypatch.setattr(lyapunov, "classify_alpha", fake_classifier(0.3))
        certificate = certify_alpha_c(0.2, 0.4, tol=1e-7, decimals=None)
        assert certificate.alpha_lo < 0.3 < certificate.alpha_hi
        assert certificate.width <= 1e-7

    def test_undetermined_span_recorded(self, monkeypatch):
        monkeypatch.setattr(lyapunov, "classify_alpha", fake_classifier(0.3, undetermined=0.01))
        certificate = certify_alpha_c(0.2, 0.4, tol=1e-5, decimals=None)
        assert not certificate.is_complete
        lo, hi = certificate.undetermined_span
        assert certificate.alpha_lo < lo <= hi < certificate.alpha_hi
        assert certificate.alpha_lo > 0.29 - 1e-4
        assert certificate.alpha_hi < 0.31 + 1e-4

    def test_undetermined_end_raises_with_partial_certificate(self, monkeypatch):
        monkeypatch.setattr(lyapunov, "classify_alpha", fake_classifier(0.3, undetermined=0.2))
        with pytest.raises(UndeterminedCertificationError) as info:
            certify_alpha_c(0.2, 0.4)
        assert info.value.certificate["lo"][1] == "undetermined"

    def test_unbracketed_critical_value(self, monkeypatch):
        monkeypatch.setattr(lyapunov, "classify_alpha", fake_classifier(0.1 + 1e-9))
        with pytest.raises(DomainError):
            certify_alpha_c(0.2, 0.4)

    def test_classifications_are_memoised(self, monkeypatch):
        calls = []
        monkeypatch.setattr(lyapunov, "classify_alpha", fake_classifier(0.3, calls=calls))
        certificate = certify_alpha_c(0.2, 0.4)
        assert len(calls) == len(set(calls))
        assert len(certificate.classifications) == len(calls)

    def test_interval_validation(self):
        with pytest.raises(DomainError):
            certify_alpha_c(0.3, 0.3)
        with pytest.raises(CertificationDomainError):
            certify_alpha_c(0.1, 0.3)

    def test_classification_far_from_critical_value(self):
        status, bracket = classify_alpha(0.45, max_depth=16)
        assert status is AlphaStatus.ABOVE
        assert bracket.certified_lower > HALF_LOG_2
        status, _ = classify_alpha(0.2, max_depth=16)
        assert status is AlphaStatus.BELOW

    @pytest.mark.slow
    def test_critical_value_between_published_decimals(self):
        assert classify_alpha(0.2689)[0] is AlphaStatus.ABOVE
        assert classify_alpha(0.2688)[0] is AlphaStatus.BELOW

    @pytest.mark.slow
    def test_full_certificate(self):
        certificate = certify_alpha_c(0.2, 0.35)
        assert certificate.is_complete
        assert certificate.alpha_lo == pytest.approx(0.2688, abs=1e-12)
        assert certificate.alpha_hi == pytest.approx(0.2689, abs=1e-12)
