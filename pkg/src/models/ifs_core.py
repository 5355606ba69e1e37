"""The maps T_x, their matrices, words, cylinders and sampling of mu_alpha.

Convention: a word ``(x_1, ..., x_n)`` stands for ``T_{x_1} o ... o T_{x_n}`` and
its matrix is the left-to-right product ``G(x_1) ... G(x_n)`` with
``G(x) = (1, x; 1, 1+x)``, so that ``T_w(s) = (a s + b) / (c s + d)``.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import reduce
from typing import Iterator, Optional, Tuple, Union

import numpy as np

from src.errors import DomainError

logger = logging.getLogger(__name__)

# Relative tolerance for the quadratic defining M_alpha.
FIXED_POINT_TOL = 1e-12


class Symbol(Enum):
    """One letter of a word: the map T_0 or the map T_alpha."""

    ZERO = 0
    ALPHA = 1

    def value(self, alpha: float) -> float:
        """Return the shift x carried by this symbol."""
        return alpha if self is Symbol.ALPHA else 0.0


class SupportType(Enum):
    """Topology of supp(mu_alpha)."""

    CANTOR = "cantor"
    INTERVAL = "interval"


def fixed_point_m(alpha: float) -> float:
    """Return M_alpha, the positive root of m^2 + alpha m - alpha = 0.

    Args:
        alpha: Shift parameter, must be positive

    Returns:
        The right endpoint of supp(mu_alpha)
    """
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    # Rationalised form of (-alpha + sqrt(alpha^2 + 4 alpha)) / 2; no cancellation.
    return 2.0 * alpha / (alpha + math.sqrt(alpha * alpha + 4.0 * alpha))


@dataclass(frozen=True)
class IfsParams:
    """The parameter alpha with its derived support endpoint M_alpha."""

    alpha: float
    m_alpha: float

    @classmethod
    def from_alpha(cls, alpha: float) -> "IfsParams":
        return cls(alpha=alpha, m_alpha=fixed_point_m(alpha))

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 < self.m_alpha < 1.0:
            raise DomainError(f"m_alpha must lie in (0, 1), got {self.m_alpha}")
        residual = self.m_alpha ** 2 + self.alpha * self.m_alpha - self.alpha
        if abs(residual) > FIXED_POINT_TOL * max(1.0, self.alpha):
            raise DomainError(
                f"m_alpha={self.m_alpha} is not the fixed point of T_{self.alpha}"
            )


@dataclass(frozen=True)
class Mat2:
    """A 2x2 real matrix (a, b; c, d) acting as s -> (a s + b)/(c s + d)."""

    a: float
    b: float
    c: float
    d: float

    @classmethod
    def identity(cls) -> "Mat2":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def generator(cls, x: float) -> "Mat2":
        """Return (1, x; 1, 1+x), the matrix of T_x."""
        return cls(1.0, x, 1.0, 1.0 + x)

    def __matmul__(self, other: "Mat2") -> "Mat2":
        return Mat2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def apply(self, s: float) -> float:
        """Apply the linear fractional map to s."""
        return (self.a * s + self.b) / (self.c * s + self.d)

    def inverse_apply(self, s: float) -> float:
        """Apply the inverse map s -> (d s - b)/(-c s + a)."""
        return (self.d * s - self.b) / (self.a - self.c * s)


@dataclass(frozen=True)
class Word:
    """A finite sequence of symbols; the empty word is the identity map."""

    symbols: Tuple[Symbol, ...] = ()

    @classmethod
    def from_bits(cls, bits) -> "Word":
        """Build a word from 0/1 values (1 meaning ALPHA)."""
        return cls(tuple(Symbol.ALPHA if bit else Symbol.ZERO for bit in bits))

    def __len__(self) -> int:
        return len(self.symbols)

    def extend(self, symbol: Symbol) -> "Word":
        return Word(self.symbols + (symbol,))

    def shifts(self, alpha: float) -> Tuple[float, ...]:
        return tuple(symbol.value(alpha) for symbol in self.symbols)


def apply_map(x: float, s: float) -> float:
    """Return T_x(s) = (s + x)/(1 + s + x)."""
    return (s + x) / (1.0 + s + x)


def word_matrix(word: Word, alpha: float) -> Mat2:
    """Return the left-to-right product of the generators of ``word``."""
    return reduce(
        lambda acc, x: acc @ Mat2.generator(x), word.shifts(alpha), Mat2.identity()
    )


def evaluate_cf(word: Word, alpha: float, s: float) -> float:
    """Evaluate [1, x_1, 1, x_2, ..., 1, x_n + s] through the word's matrix."""
    return word_matrix(word, alpha).apply(s)


def cylinder_interval(word: Word, alpha: float) -> Tuple[float, float]:
    """Return the image of [0, M_alpha] under the word's map.

    Returns:
        Tuple (b/d, (a M + b)/(c M + d))
    """
    m_alpha = fixed_point_m(alpha)
    mat = word_matrix(word, alpha)
    return mat.b / mat.d, mat.apply(m_alpha)


def cylinder_length(word: Word, alpha: float) -> float:
    """Return M/(d (c M + d)), the length of the word's cylinder (det = 1)."""
    m_alpha = fixed_point_m(alpha)
    mat = word_matrix(word, alpha)
    return m_alpha / (mat.d * (mat.c * m_alpha + mat.d))


def gap(alpha: float) -> float:
    """Return T_alpha(0) - T_0(M_alpha); positive iff the two images are disjoint."""
    m_alpha = fixed_point_m(alpha)
    return apply_map(alpha, 0.0) - apply_map(0.0, m_alpha)


def support_type(alpha: float) -> Tuple[SupportType, float]:
    """Classify supp(mu_alpha) as a Cantor set or the interval [0, M_alpha].

    Returns:
        Tuple of (support type, gap)
    """
    g = gap(alpha)
    return (SupportType.CANTOR if g > 0 else SupportType.INTERVAL), g


def enumerate_words(depth: int) -> Iterator[Word]:
    """Yield every word of the given length in lexicographic order (ZERO first)."""
    stack = [Word()]
    while stack:
        word = stack.pop()
        if len(word) == depth:
            yield word
            continue
        stack.append(word.extend(Symbol.ALPHA))
        stack.append(word.extend(Symbol.ZERO))


@dataclass(frozen=True)
class WordBlock:
    """Matrices of all words sharing one prefix, as parallel numpy arrays."""

    prefix: Tuple[int, ...]
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __len__(self) -> int:
        return len(self.a)


def leaf_matrices(depth: int, alpha: float) -> Tuple[np.ndarray, ...]:
    """Return arrays (a, b, c, d) for all words of ``depth``, lexicographically."""
    a = np.ones(1)
    b = np.zeros(1)
    c = np.zeros(1)
    d = np.ones(1)
    for _ in range(depth):
        # Right multiplication by G(0) and G(alpha), interleaved to keep lex order.
        a_next = a + b
        c_next = c + d
        b_next = np.stack([b, alpha * a + (1.0 + alpha) * b], axis=1).ravel()
        d_next = np.stack([d, alpha * c + (1.0 + alpha) * d], axis=1).ravel()
        a = np.repeat(a_next, 2)
        c = np.repeat(c_next, 2)
        b, d = b_next, d_next
    return a, b, c, d


def iter_prefixes(depth: int, alpha: float) -> Iterator[Tuple[Tuple[int, ...], Mat2]]:
    """Depth-first walk over all prefixes with an explicit stack of running products."""
    generators = (Mat2.generator(0.0), Mat2.generator(alpha))
    stack = [((), Mat2.identity())]
    while stack:
        bits, mat = stack.pop()
        if len(bits) == depth:
            yield bits, mat
            continue
        stack.append((bits + (1,), mat @ generators[1]))
        stack.append((bits + (0,), mat @ generators[0]))


def default_leaf_depth(depth: int, max_leaf: int = 16) -> int:
    return min(depth, max_leaf)


def iter_word_blocks(
    depth: int, alpha: float, leaf_depth: Optional[int] = None
) -> Iterator[WordBlock]:
    """Yield the matrices of all words of ``depth`` grouped by prefix.

    Only one leaf table of 2^leaf_depth matrices is held in memory; the
    2^(depth - leaf_depth) prefixes are walked depth-first.

    Args:
        depth: Word length n
        alpha: Shift parameter
        leaf_depth: Length of the vectorized suffix block

    Yields:
        WordBlock objects in lexicographic word order
    """
    if depth < 0:
        raise DomainError(f"depth must be non-negative, got {depth}")
    leaf = default_leaf_depth(depth) if leaf_depth is None else min(leaf_depth, depth)
    la, lb, lc, ld = leaf_matrices(leaf, alpha)
    for bits, p in iter_prefixes(depth - leaf, alpha):
        yield WordBlock(
            prefix=bits,
            a=p.a * la + p.b * lc,
            b=p.a * lb + p.b * ld,
            c=p.c * la + p.d * lc,
            d=p.c * lb + p.d * ld,
        )


def compose_maps(shifts: np.ndarray, s: Union[float, np.ndarray] = 0.0) -> np.ndarray:
    """Evaluate T_{x_1} o ... o T_{x_n}(s) row-wise for a (samples, n) array of shifts."""
    shifts = np.atleast_2d(shifts)
    value = np.broadcast_to(np.asarray(s, dtype=float), shifts.shape[:1]).copy()
    for k in range(shifts.shape[1] - 1, -1, -1):
        value = (value + shifts[:, k]) / (1.0 + value + shifts[:, k])
    return value


def sample_mu(
    alpha: float,
    depth: int,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> Union[float, np.ndarray]:
    """Draw from mu_alpha by truncating the random continued fraction.

    The exact variable lies in the cylinder of the drawn word, whose length is
    at most 1/depth, so that bounds the truncation error.

    Args:
        alpha: Shift parameter
        depth: Number of random maps composed
        rng: Random stream
        size: Number of draws; None returns a single float

    Returns:
        A float or an array of draws
    """
    if depth < 1:
        raise DomainError(f"depth must be at least 1, got {depth}")
    fixed_point_m(alpha)
    count = 1 if size is None else int(size)
    bits = rng.integers(0, 2, size=(count, depth))
    values = compose_maps(alpha * bits, 0.0)
    return float(values[0]) if size is None else values
