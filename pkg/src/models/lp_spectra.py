"""Expected tensor powers R_p = E[M^(x)r] and the L^p-density exclusion thresholds.

R_p acts on (R^2)^(x)r with r = 2(p - 1). The threshold alpha_p is where the
Perron root of R_p reaches 2^(p-1): above it 2^(-n) E[D_n^2]-type moments
diverge and mu_alpha has no L^p density. (The printed threshold 2^((p-1)/2)
contradicts the p = 2 computation and the p -> infinity limit; 2^(p-1)
reproduces both.)
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import optimize

from src.errors import ConvergenceError, DomainError, ResourceLimitError, ShapeError
from src.models.ifs_core import fixed_point_m, iter_word_blocks

logger = logging.getLogger(__name__)

MAX_TENSOR_DIM = 1 << 22
# alpha_p -> (3 sqrt 2 - 4)/2 from above as r grows.
LIMIT_ALPHA = (3.0 * math.sqrt(2.0) - 4.0) / 2.0


def _generators(alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    return np.array([[1.0, 0.0], [1.0, 1.0]]), np.array([[1.0, alpha], [1.0, 1.0 + alpha]])


def _symmetric_block(g: np.ndarray, r: int) -> np.ndarray:
    """Action of g^(x)r on symmetric tensors, indexed by the number of 1-indices."""
    block = np.zeros((r + 1, r + 1))
    for w in range(r + 1):
        row = P.polymul(P.polypow([g[0, 0], g[0, 1]], r - w), P.polypow([g[1, 0], g[1, 1]], w))
        block[w, : len(row)] = row[: r + 1]
    return block


@dataclass(frozen=True)
class TensorOp:
    """R = 1/2 G(0)^(x)r + 1/2 G(alpha)^(x)r, applied matrix-free.

    With ``symmetric`` the operator is restricted to the (r+1)-dimensional
    subspace of symmetric tensors, which contains the all-ones vector and the
    Perron eigenvector.
    """

    alpha: float
    r: int
    symmetric: bool = False
    max_tensor_dim: int = MAX_TENSOR_DIM

    def __post_init__(self):
        if self.alpha < 0:
            raise DomainError(f"alpha must be non-negative, got {self.alpha}")
        if self.r < 0:
            raise DomainError(f"tensor order must be non-negative, got {self.r}")
        if self.dimension > self.max_tensor_dim:
            raise ResourceLimitError(
                f"tensor order r={self.r} needs 2^{self.r} = {2 ** self.r} entries, "
                f"above the budget of {self.max_tensor_dim}"
            )

    @property
    def dimension(self) -> int:
        return self.r + 1 if self.symmetric else 2 ** self.r

    @property
    def p(self) -> Fraction:
        return Fraction(self.r, 2) + 1

    @property
    def threshold(self) -> float:
        """2^(p-1), the Perron root at which the L^p criterion switches."""
        return 2.0 ** (self.r / 2.0)

    def corner_vector(self) -> np.ndarray:
        """The basis vector e_(1,...,1), i.e. e_last."""
        v = np.zeros(self.dimension)
        v[-1] = 1.0
        return v

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Return 1/2 (G(0)^(x)r) v + 1/2 (G(alpha)^(x)r) v."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dimension,):
            raise ShapeError(f"expected a vector of length {self.dimension}, got shape {v.shape}")
        if self.symmetric:
            return self._symmetric_matrix() @ v
        out = np.zeros_like(v)
        for g in _generators(self.alpha):
            w = v.reshape((2,) * self.r)
            for axis in range(self.r):
                w = np.moveaxis(np.tensordot(g, w, axes=([1], [axis])), 0, axis)
            out += 0.5 * w.reshape(-1)
        return out

    def _symmetric_matrix(self) -> np.ndarray:
        g0, ga = _generators(self.alpha)
        return 0.5 * (_symmetric_block(g0, self.r) + _symmetric_block(ga, self.r))

    def dense_matrix(self) -> np.ndarray:
        """Build the operator explicitly (Kronecker powers, or the reduced matrix)."""
        if self.symmetric:
            return self._symmetric_matrix()
        g0, ga = _generators(self.alpha)
        power = lambda g: reduce(np.kron, [g] * self.r, np.ones((1, 1)))
        return 0.5 * (power(g0) + power(ga))


@dataclass(frozen=True)
class LpThreshold:
    """alpha_p for p = r/2 + 1, with the Perron root found there."""

    p: Fraction
    r: int
    alpha_p: float
    gamma_at_threshold: float

    @property
    def limit_gap(self) -> float:
        return self.alpha_p - LIMIT_ALPHA


def tensor_apply(op: TensorOp, v: np.ndarray) -> np.ndarray:
    return op.apply(v)


def power_iteration(op: TensorOp, tol: float = 1e-13, max_iter: int = 1_000_000) -> Tuple[float, np.ndarray]:
    """Return the Perron root and eigenvector of a nonnegative operator.

    Starts from the all-ones vector. While the iterate x is positive the
    Collatz-Wielandt bounds min(Rx/x) <= rho <= max(Rx/x) bracket the root, and
    iteration stops once they agree to ``tol`` (relative); it also stops once the
    Rayleigh quotient has changed by less than ``tol`` for three consecutive
    iterations. At alpha = 0 the operator is unipotent and the answer is exact.

    Raises:
        ConvergenceError: after max_iter iterations, carrying the last iterate
    """
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol}")
    if op.alpha == 0.0:
        # G(0)^(x)r is lower triangular with unit diagonal and fixes e_last.
        return 1.0, op.corner_vector()
    x = np.ones(op.dimension) / math.sqrt(op.dimension)
    estimate = math.nan
    calm = 0
    for iteration in range(1, max_iter + 1):
        y = op.apply(x)
        rayleigh = float(x @ y) / float(x @ x)
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            raise ConvergenceError("operator annihilated the iterate", x, rayleigh)
        if np.all(x > 0.0):
            ratios = y / x
            lower, upper = float(ratios.min()), float(ratios.max())
            if upper - lower <= tol * upper:
                logger.debug(
                    "power iteration r=%d alpha=%r: rho in [%r, %r] after %d steps",
                    op.r, op.alpha, lower, upper, iteration,
                )
                return rayleigh, y / norm
        x = y / norm
        if math.isfinite(estimate) and abs(rayleigh - estimate) <= tol * abs(rayleigh):
            calm += 1
        else:
            calm = 0
        estimate = rayleigh
        if calm >= 3:
            logger.debug("power iteration r=%d alpha=%r: %r after %d steps", op.r, op.alpha, estimate, iteration)
            return estimate, x
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} steps (r={op.r}, alpha={op.alpha})",
        x,
        estimate,
    )


def spectral_radius(op: TensorOp, tol: float = 1e-13, max_iter: int = 1_000_000) -> float:
    """Return the Perron root of ``op`` by power iteration."""
    return power_iteration(op, tol, max_iter)[0]


def char_poly_r2(alpha: float) -> Tuple[float, float, float, float, float]:
    """Coefficients (t^4 ... t^0) of the characteristic polynomial of R for p = 2."""
    return (
        1.0,
        -(4.0 + 2.0 * alpha + alpha ** 2 / 2.0),
        6.0 + 4.0 * alpha + alpha ** 2 / 2.0,
        -(4.0 + 2.0 * alpha),
        1.0,
    )


def deterministic_top_eigen(alpha: float) -> float:
    """Largest root of t^2 - (2 + alpha) t + 1, the top eigenvalue of G(alpha)."""
    if alpha < 0:
        raise DomainError(f"alpha must be non-negative, got {alpha}")
    return (2.0 + alpha + math.sqrt(alpha * alpha + 4.0 * alpha)) / 2.0


def lp_threshold(
    r: int, tol: float = 1e-10, symmetric: bool = True, max_tensor_dim: int = MAX_TENSOR_DIM
) -> LpThreshold:
    """Solve spectral_radius(R_p(alpha)) = 2^(p-1) for alpha, with p = r/2 + 1.

    The root is bracketed by ((3 sqrt 2 - 4)/2, 1/2): below the limit value the
    Perron root stays under 2^(p-1) for every r, and at 1/2 it exceeds it.

    Raises:
        DomainError: r < 1, or the root is not bracketed
    """
    if r < 1:
        raise DomainError(f"tensor order must be at least 1, got {r}")
    target = 2.0 ** (r / 2.0)
    power_tol = min(1e-13, tol * 1e-3)

    def excess(alpha: float) -> float:
        op = TensorOp(alpha, r, symmetric=symmetric, max_tensor_dim=max_tensor_dim)
        return spectral_radius(op, power_tol) - target

    lo, hi = LIMIT_ALPHA, 0.5
    if not excess(lo) < 0.0 < excess(hi):
        raise DomainError(f"threshold for r={r} is not bracketed by [{lo}, {hi}]")
    alpha_p = optimize.bisect(excess, lo, hi, xtol=tol)
    gamma = excess(alpha_p) + target
    logger.info("r=%d (p=%s): alpha_p=%r, gamma=%r", r, Fraction(r, 2) + 1, alpha_p, gamma)
    return LpThreshold(p=Fraction(r, 2) + 1, r=r, alpha_p=alpha_p, gamma_at_threshold=gamma)


def corner_moment_growth(alpha: float, r: int, steps: int, symmetric: bool = False) -> np.ndarray:
    """Return 2^((1-p) n) e_last . R_p^n e_last for n = 1..steps.

    The sequence grows without bound above alpha_p and decays below it.
    """
    op = TensorOp(alpha, r, symmetric=symmetric)
    v = op.corner_vector()
    values = np.empty(steps)
    for n in range(steps):
        v = op.apply(v) / op.threshold
        values[n] = v[-1]
    return values


def cylinder_energy(alpha: float, n: int) -> float:
    """Return 2^-n E[D_n (C_n M + D_n) / M] as an exact word sum.

    This is the lower bound on the squared L^2 norm of a density of mu_alpha
    obtained from the diagonal cylinder terms.
    """
    m_alpha = fixed_point_m(alpha)
    partials = [
        float(np.sum(block.d * (block.c * m_alpha + block.d)))
        for block in iter_word_blocks(n, alpha)
    ]
    return math.fsum(partials) * 4.0 ** (-n) / m_alpha
