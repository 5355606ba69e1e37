"""Exact evaluation of F_n = K_alpha^n F_0 and of log-integrals against dF_n.

F_n is never materialised: with U uniform on [0, M_alpha],

    F_n(s) = 2^-n sum_{|w| = n} P(T_w(U) <= s)
    int g dF_n = 2^-n sum_{|w| = n} (1/M_alpha) int_0^M g(T_w(t)) dt

and every integrand used here is a signed sum of logarithms of affine
functions of t, which integrate in closed form.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from itertools import islice
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import DomainError
from src.models.ifs_core import (
    IfsParams,
    WordBlock,
    apply_map,
    iter_word_blocks,
)

logger = logging.getLogger(__name__)

# F_1 <= F_0 (and hence the monotone sandwich) holds iff alpha >= 1/6.
SANDWICH_ALPHA = 1.0 / 6.0
START_CHECK_MARGIN = 1e-12
# Cap on (words x points) entries held at once by cdf_eval.
CDF_BLOCK_ENTRIES = 1 << 21


@dataclass(frozen=True)
class IteratedCdf:
    """F_n = K_alpha^n F_0 with F_0(s) = s / M_alpha, evaluated lazily."""

    params: IfsParams
    depth: int

    def __post_init__(self):
        if self.depth < 0:
            raise DomainError(f"depth must be non-negative, got {self.depth}")

    @classmethod
    def create(cls, alpha: float, depth: int) -> "IteratedCdf":
        return cls(IfsParams.from_alpha(alpha), depth)

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def m_alpha(self) -> float:
        return self.params.m_alpha


class IntegrandKind(Enum):
    LOWER = "lower"
    UPPER = "upper"
    EPS = "eps"


@dataclass(frozen=True)
class LogIntegrand:
    """A logarithmic integrand from the epsilon-norm family.

    EPS(eps) is 1/2 [log(s + 1 - eps) + log(s + alpha + 1 - eps)
    - 2 log(eps s + 1 - eps)]; LOWER is eps = 0, i.e. 1/2 log[(1+s)(1+s+alpha)],
    and UPPER is eps = 1, i.e. 1/2 log(1 + alpha/s).
    """

    kind: IntegrandKind
    eps: float = 0.0

    @classmethod
    def lower(cls) -> "LogIntegrand":
        return cls(IntegrandKind.LOWER, 0.0)

    @classmethod
    def upper(cls) -> "LogIntegrand":
        return cls(IntegrandKind.UPPER, 1.0)

    @classmethod
    def with_eps(cls, eps: float) -> "LogIntegrand":
        if not 0.0 <= eps <= 1.0:
            raise DomainError(f"eps must lie in [0, 1], got {eps}")
        return cls(IntegrandKind.EPS, float(eps))

    def __post_init__(self):
        expected = {IntegrandKind.LOWER: 0.0, IntegrandKind.UPPER: 1.0}.get(self.kind)
        if expected is not None and self.eps != expected:
            raise DomainError(f"{self.kind.name} integrand fixes eps={expected}")

    def terms(self, alpha: float) -> List[Tuple[float, float, float]]:
        """Return (coefficient, u, v) triples with g(T_w t) = sum coef log(u(at+b) + v(ct+d))."""
        eps = self.eps
        beta = 1.0 - eps
        if eps == 1.0:
            return [(0.5, 1.0, alpha), (-0.5, 1.0, 0.0)]
        return [(0.5, 1.0, beta), (0.5, 1.0, beta + alpha), (-1.0, eps, beta)]

    def __call__(self, s, alpha: float):
        """Evaluate the integrand pointwise."""
        s = np.asarray(s, dtype=float)
        eps = self.eps
        beta = 1.0 - eps
        with np.errstate(divide="ignore"):
            return 0.5 * (
                np.log(s + beta) + np.log(s + alpha + beta) - 2.0 * np.log(eps * s + beta)
            )


def log_affine_integral(p: np.ndarray, q: np.ndarray, length: float) -> np.ndarray:
    """Return int_0^length log(p t + q) dt for p, q >= 0, elementwise.

    Uses length * log q + (q/p)[(1 + x) log1p(x) - x] with x = p length / q,
    with the limits p -> 0 (length log q) and q -> 0 (length (log(p length) - 1)).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    out = np.empty(np.broadcast(p, q).shape)
    p, q = np.broadcast_arrays(p, q)

    zero_q = q == 0.0
    zero_p = (p == 0.0) & ~zero_q
    regular = ~(zero_q | zero_p)

    if np.any(zero_q):
        out[zero_q] = length * (np.log(p[zero_q] * length) - 1.0)
    if np.any(zero_p):
        out[zero_p] = length * np.log(q[zero_p])
    if np.any(regular):
        pr = p[regular]
        qr = q[regular]
        x = pr * length / qr
        out[regular] = length * np.log(qr) + (qr / pr) * ((1.0 + x) * np.log1p(x) - x)
    return out


def _block_integrals(
    block: WordBlock, alpha: float, m_alpha: float, term_sets: Sequence[List[Tuple[float, float, float]]]
) -> List[float]:
    sums = []
    for terms in term_sets:
        total = np.zeros(len(block))
        for coef, u, v in terms:
            p = u * block.a + v * block.c
            q = u * block.b + v * block.d
            total += coef * log_affine_integral(p, q, m_alpha)
        sums.append(float(np.sum(total)))
    return sums


def _map_blocks(
    func: Callable[[WordBlock], List],
    blocks: Iterable[WordBlock],
    threads: int,
) -> List[List]:
    if threads <= 1:
        return [func(block) for block in blocks]
    results: List[List] = []
    blocks = iter(blocks)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # Bounded batches: only a few word blocks are alive at any time.
        while True:
            batch = list(islice(blocks, 2 * threads))
            if not batch:
                break
            results.extend(pool.map(func, batch))
    return results


def stieltjes_log_integrals(
    f: IteratedCdf,
    integrands: Sequence[LogIntegrand],
    threads: int = 1,
    leaf_depth: Optional[int] = None,
) -> np.ndarray:
    """Integrate several log integrands against dF_n in a single word pass.

    Per-prefix partial sums are combined with math.fsum in prefix order, so the
    result does not depend on the number of threads.

    Args:
        f: Iterated c.d.f. F_n
        integrands: Integrands to evaluate
        threads: Worker threads over word prefixes
        leaf_depth: Length of the vectorized suffix block

    Returns:
        Array of integrals, one per integrand
    """
    alpha, m_alpha = f.alpha, f.m_alpha
    term_sets = [g.terms(alpha) for g in integrands]
    partials = _map_blocks(
        lambda block: _block_integrals(block, alpha, m_alpha, term_sets),
        iter_word_blocks(f.depth, alpha, leaf_depth),
        threads,
    )
    scale = 2.0 ** (-f.depth) / m_alpha
    values = np.array([math.fsum(column) for column in zip(*partials)]) * scale
    logger.debug("depth %d integrals at alpha=%r: %s", f.depth, alpha, values)
    return values


def stieltjes_log_integral(
    f: IteratedCdf, g: LogIntegrand, threads: int = 1, leaf_depth: Optional[int] = None
) -> float:
    """Return int g dF_n exactly up to rounding."""
    return float(stieltjes_log_integrals(f, [g], threads, leaf_depth)[0])


def _block_cdf(block: WordBlock, m_alpha: float, s: np.ndarray) -> np.ndarray:
    a = block.a[:, None]
    b = block.b[:, None]
    c = block.c[:, None]
    d = block.d[:, None]
    lo = b / d
    hi = (a * m_alpha + b) / (c * m_alpha + d)
    inside = (s > lo) & (s < hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        preimage = (d * s - b) / (a - c * s)
    values = np.where(inside, preimage / m_alpha, 0.0)
    values = np.where(s >= hi, 1.0, values)
    return np.clip(values, 0.0, 1.0).sum(axis=0)


def cdf_eval(
    f: IteratedCdf, s: Union[float, np.ndarray], threads: int = 1
) -> Union[float, np.ndarray]:
    """Evaluate F_n at one point or an array of points.

    F_n(s) = 2^-n sum_w clamp(T_w^-1(s)/M_alpha) where the clamp sends points
    left of the cylinder of w to 0 and points right of it to 1. Points outside
    [0, M_alpha] therefore evaluate to 0 or 1.
    """
    scalar = np.ndim(s) == 0
    points = np.atleast_1d(np.asarray(s, dtype=float))
    m_alpha = f.m_alpha
    leaf = max(0, min(f.depth, int(math.log2(max(1, CDF_BLOCK_ENTRIES // len(points))))))
    partials = _map_blocks(
        lambda block: [_block_cdf(block, m_alpha, points)],
        iter_word_blocks(f.depth, f.alpha, leaf),
        threads,
    )
    total = np.sum(np.stack([p[0] for p in partials]), axis=0) * 2.0 ** (-f.depth)
    # Exact boundary values.
    total = np.where(points <= 0.0, 0.0, total)
    total = np.where(points >= m_alpha, 1.0, total)
    return float(total[0]) if scalar else total


def apply_operator(
    previous: Callable[[np.ndarray], np.ndarray], alpha: float, s: Union[float, np.ndarray]
) -> np.ndarray:
    """One step of K_alpha: 1/2 F(T_0^-1 s) + 1/2 F(T_0^-1 s - alpha), clamped."""
    s = np.asarray(s, dtype=float)
    m_alpha = IfsParams.from_alpha(alpha).m_alpha
    with np.errstate(divide="ignore"):
        u = np.where(s < 1.0, s / (1.0 - s), np.inf)

    def clamped(x):
        inner = np.clip(x, 0.0, m_alpha)
        return np.where(x <= 0.0, 0.0, np.where(x >= m_alpha, 1.0, previous(inner)))

    return 0.5 * clamped(u) + 0.5 * clamped(u - alpha)


def monotone_start_check(alpha: float, margin: float = START_CHECK_MARGIN) -> bool:
    """Return True iff F_1 <= F_0, i.e. 1 - alpha/(2M) <= 1/(1 + M) (alpha >= 1/6)."""
    params = IfsParams.from_alpha(alpha)
    m_alpha = params.m_alpha
    f1 = 1.0 - alpha / (2.0 * m_alpha)
    f0 = apply_map(0.0, m_alpha) / m_alpha
    return f1 <= f0 + margin


def cdf_breakpoints(f: IteratedCdf) -> np.ndarray:
    """Return the sorted cylinder endpoints of depth n, where F_n has kinks."""
    ends = []
    for block in iter_word_blocks(f.depth, f.alpha):
        ends.append(block.b / block.d)
        ends.append((block.a * f.m_alpha + block.b) / (block.c * f.m_alpha + block.d))
    return np.unique(np.concatenate(ends))
