"""Lyapunov-exponent brackets, Monte Carlo estimates and the alpha_c certificate."""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.errors import (
    CertificationDomainError,
    DomainError,
    UndeterminedCertificationError,
)
from src.models.cdf_engine import (
    SANDWICH_ALPHA,
    IteratedCdf,
    LogIntegrand,
    monotone_start_check,
    stieltjes_log_integrals,
)
from src.models.ifs_core import fixed_point_m

logger = logging.getLogger(__name__)

HALF_LOG_2 = 0.5 * math.log(2.0)
DEFAULT_MARGIN = 1e-9
START_DEPTH = 10
DEPTH_STEP = 2
MAX_DEPTH = 26


@dataclass(frozen=True)
class LyapunovBracket:
    """Certified enclosure lower <= lambda_alpha <= upper at a given depth (nats)."""

    alpha: float
    depth: int
    lower: float
    upper: float
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        if self.certified_lower > self.certified_upper:
            raise DomainError(
                f"bracket inverted at alpha={self.alpha}, depth={self.depth}: "
                f"{self.lower} > {self.upper}"
            )

    @property
    def certified_lower(self) -> float:
        return self.lower - self.margin

    @property
    def certified_upper(self) -> float:
        return self.upper + self.margin

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.certified_lower <= value <= self.certified_upper


class AlphaStatus(Enum):
    """Position of lambda_alpha relative to 1/2 log 2."""

    BELOW = "below"
    ABOVE = "above"
    UNDETERMINED = "undetermined"


@dataclass
class AlphaCCertificate:
    """Certified interval (alpha_lo, alpha_hi) containing alpha_c.

    ``undetermined_span`` is set when some alpha could not be classified at the
    maximal depth; the certificate is then partial.
    """

    alpha_lo: float
    alpha_hi: float
    depth_used: int
    bracket_lo: LyapunovBracket
    bracket_hi: LyapunovBracket
    undetermined_span: Optional[Tuple[float, float]] = None
    classifications: List[Tuple[float, str, int]] = field(default_factory=list)

    @property
    def is_complete(self) -> bool:
        return self.undetermined_span is None

    @property
    def width(self) -> float:
        return self.alpha_hi - self.alpha_lo


def _require_sandwich(alpha: float) -> None:
    if not monotone_start_check(alpha):
        raise CertificationDomainError(
            f"alpha={alpha} < 1/6: F_1 <= F_0 fails, the bound is not justified"
        )


@lru_cache(maxsize=256)
def _bracket_values(alpha: float, n: int, threads: int = 1) -> Tuple[float, float]:
    lower, upper = stieltjes_log_integrals(
        IteratedCdf.create(alpha, n), [LogIntegrand.lower(), LogIntegrand.upper()], threads
    )
    return float(lower), float(upper)


def lyapunov_lower(alpha: float, n: int, threads: int = 1) -> float:
    """Return 1/2 int log[(1+s)(1+s+alpha)] dF_n(s), a lower bound on lambda_alpha."""
    _require_sandwich(alpha)
    return _bracket_values(alpha, n, threads)[0]


def lyapunov_upper(alpha: float, n: int, threads: int = 1) -> float:
    """Return 1/2 int log(1 + alpha/s) dF_n(s), an upper bound on lambda_alpha."""
    _require_sandwich(alpha)
    return _bracket_values(alpha, n, threads)[1]


def lyapunov_bracket(
    alpha: float, n: int, margin: float = DEFAULT_MARGIN, threads: int = 1
) -> LyapunovBracket:
    """Return both bounds at depth n from a single word enumeration."""
    _require_sandwich(alpha)
    lower, upper = _bracket_values(alpha, n, threads)
    return LyapunovBracket(alpha=alpha, depth=n, lower=lower, upper=upper, margin=margin)


def lyapunov_eps(alpha: float, eps: float, n: int, threads: int = 1) -> float:
    """Integrate the epsilon-norm log-change against dF_n.

    Only eps = 0 and eps = 1 give one-sided guarantees (for alpha >= 1/6); other
    values are diagnostics.
    """
    fixed_point_m(alpha)
    integrand = LogIntegrand.with_eps(eps)
    return float(stieltjes_log_integrals(IteratedCdf.create(alpha, n), [integrand], threads)[0])


def lyapunov_mc(
    alpha: float,
    steps: int,
    trials: int,
    rng: np.random.Generator,
    prob_alpha: float = 0.5,
) -> Tuple[float, float]:
    """Estimate lambda_alpha by sampling the bottom row (C_n, D_n) of random products.

    Each trial returns log(D_n (C_n M + D_n)/M) / (2n). The row vector is
    rescaled every step by its eps=0 norm (its second entry) and the log scale
    is accumulated.

    Args:
        alpha: Shift parameter
        steps: Number of random factors n
        trials: Independent trials
        rng: Random stream
        prob_alpha: Probability of drawing the alpha symbol

    Returns:
        Tuple (mean, standard error); the standard error is NaN for one trial
    """
    if steps < 1 or trials < 1:
        raise DomainError(f"steps and trials must be positive, got {steps}, {trials}")
    m_alpha = fixed_point_m(alpha)
    c = np.zeros(trials)
    d = np.ones(trials)
    log_scale = np.zeros(trials)
    for _ in range(steps):
        x = alpha * (rng.random(trials) < prob_alpha)
        # (c, d) (1, x; 1, 1+x) = (c + d, c x + d (1 + x))
        c, d = c + d, c * x + d * (1.0 + x)
        log_scale += np.log(d)
        c = c / d
        d = np.ones(trials)
    estimates = (2.0 * log_scale + np.log((c * m_alpha + 1.0) / m_alpha)) / (2.0 * steps)
    mean = float(np.mean(estimates))
    stderr = float(np.std(estimates, ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    logger.debug("mc alpha=%r steps=%d trials=%d: %r +- %r", alpha, steps, trials, mean, stderr)
    return mean, stderr


def dimension_bound(lambda_lower: float) -> float:
    """Return log 2 / (2 lambda); with a certified lower lambda this bounds the dimension."""
    if not lambda_lower > 0:
        raise DomainError(f"lambda must be positive, got {lambda_lower}")
    return math.log(2.0) / (2.0 * lambda_lower)


def classify_alpha(
    alpha: float,
    max_depth: int = MAX_DEPTH,
    margin: float = DEFAULT_MARGIN,
    start_depth: int = START_DEPTH,
    depth_step: int = DEPTH_STEP,
    threads: int = 1,
) -> Tuple[AlphaStatus, LyapunovBracket]:
    """Deepen the bracket at alpha until 1/2 log 2 leaves it or max_depth is reached."""
    _require_sandwich(alpha)
    depth = min(start_depth, max_depth)
    while True:
        bracket = lyapunov_bracket(alpha, depth, margin, threads)
        if bracket.certified_lower > HALF_LOG_2:
            status = AlphaStatus.ABOVE
        elif bracket.certified_upper < HALF_LOG_2:
            status = AlphaStatus.BELOW
        else:
            status = AlphaStatus.UNDETERMINED
        logger.debug(
            "alpha=%r depth=%d bracket=[%r, %r] -> %s",
            alpha, depth, bracket.lower, bracket.upper, status.value,
        )
        if status is not AlphaStatus.UNDETERMINED or depth >= max_depth:
            break
        depth = min(depth + depth_step, max_depth)
    if status is AlphaStatus.UNDETERMINED:
        logger.warning("alpha=%r undetermined at depth %d", alpha, depth)
    else:
        logger.info("alpha=%r is %s alpha_c (depth %d)", alpha, status.value, depth)
    return status, bracket


class _Classifier:
    """Memoised classify_alpha recording every classification made."""

    def __init__(self, **options):
        self.options = options
        self.results: Dict[float, Tuple[AlphaStatus, LyapunovBracket]] = {}

    def __call__(self, alpha: float) -> Tuple[AlphaStatus, LyapunovBracket]:
        if alpha not in self.results:
            self.results[alpha] = classify_alpha(alpha, **self.options)
        return self.results[alpha]

    def undetermined(self) -> List[float]:
        return sorted(
            a for a, (status, _) in self.results.items() if status is AlphaStatus.UNDETERMINED
        )


def _narrow(classifier: _Classifier, certified: float, other: float, target: AlphaStatus, tol: float) -> float:
    """Move the certified end toward ``other`` while classifications keep returning ``target``."""
    while abs(other - certified) > tol:
        mid = 0.5 * (certified + other)
        if classifier(mid)[0] is target:
            certified = mid
        else:
            other = mid
    return certified


def certify_alpha_c(
    lo: float,
    hi: float,
    max_depth: int = MAX_DEPTH,
    margin: float = DEFAULT_MARGIN,
    tol: float = 1e-5,
    decimals: Optional[int] = 4,
    start_depth: int = START_DEPTH,
    depth_step: int = DEPTH_STEP,
    threads: int = 1,
) -> AlphaCCertificate:
    """Certify an interval containing alpha_c by bisection on alpha.

    lambda_alpha is increasing in alpha, so an alpha classified BELOW moves the
    left end and ABOVE moves the right end. Undetermined alphas never move an
    end; the search then narrows each end separately and the certificate carries
    the undetermined span. With ``decimals`` set, the ends are rounded outward
    and re-certified.

    Raises:
        CertificationDomainError: lo <= 1/6
        DomainError: empty interval or alpha_c not bracketed
        UndeterminedCertificationError: an initial end cannot be classified
    """
    if not lo < hi:
        raise DomainError(f"empty interval [{lo}, {hi}]")
    if lo <= SANDWICH_ALPHA:
        raise CertificationDomainError(f"lo={lo} must exceed 1/6")
    if not margin > 0:
        raise DomainError(f"margin must be positive, got {margin}")

    classifier = _Classifier(
        max_depth=max_depth, margin=margin, start_depth=start_depth,
        depth_step=depth_step, threads=threads,
    )
    status_lo, _ = classifier(lo)
    status_hi, _ = classifier(hi)
    if status_lo is AlphaStatus.ABOVE or status_hi is AlphaStatus.BELOW:
        raise DomainError(f"alpha_c is not inside [{lo}, {hi}]")
    if AlphaStatus.UNDETERMINED in (status_lo, status_hi):
        raise UndeterminedCertificationError(
            f"cannot classify the ends of [{lo}, {hi}] at depth {max_depth}",
            certificate={"lo": (lo, status_lo.value), "hi": (hi, status_hi.value)},
        )

    a_lo, a_hi = lo, hi
    while a_hi - a_lo > tol:
        mid = 0.5 * (a_lo + a_hi)
        status, _ = classifier(mid)
        if status is AlphaStatus.BELOW:
            a_lo = mid
        elif status is AlphaStatus.ABOVE:
            a_hi = mid
        else:
            a_lo = _narrow(classifier, a_lo, mid, AlphaStatus.BELOW, tol)
            a_hi = _narrow(classifier, a_hi, mid, AlphaStatus.ABOVE, tol)
            break

    if decimals is not None:
        a_lo, a_hi = _snap_outward(classifier, a_lo, a_hi, decimals)

    _, bracket_lo = classifier(a_lo)
    _, bracket_hi = classifier(a_hi)
    undetermined = [a for a in classifier.undetermined() if a_lo < a < a_hi]
    certificate = AlphaCCertificate(
        alpha_lo=a_lo,
        alpha_hi=a_hi,
        depth_used=max(bracket_lo.depth, bracket_hi.depth),
        bracket_lo=bracket_lo,
        bracket_hi=bracket_hi,
        undetermined_span=(undetermined[0], undetermined[-1]) if undetermined else None,
        classifications=[(a, s.value, b.depth) for a, (s, b) in sorted(classifier.results.items())],
    )
    logger.info(
        "alpha_c in (%r, %r), depth %d%s",
        a_lo, a_hi, certificate.depth_used,
        "" if certificate.is_complete else " (partial)",
    )
    return certificate


def _snap_outward(classifier: _Classifier, a_lo: float, a_hi: float, decimals: int) -> Tuple[float, float]:
    """Round the ends outward to ``decimals`` places, keeping them only if re-certified."""
    scale = 10.0 ** decimals
    snapped_lo = math.floor(a_lo * scale) / scale
    snapped_hi = math.ceil(a_hi * scale) / scale
    if (
        SANDWICH_ALPHA < snapped_lo != a_lo
        and classifier(snapped_lo)[0] is AlphaStatus.BELOW
    ):
        a_lo = snapped_lo
    if snapped_hi != a_hi and classifier(snapped_hi)[0] is AlphaStatus.ABOVE:
        a_hi = snapped_hi
    return a_lo, a_hi
