"""Galton-Watson conductance: the c.d.f. functional equation and its Monte Carlo oracles.

The conductance gamma of a Galton-Watson tree with an adjoined parent solves

    F(s) = sum_k p_k F^{*k}(s / (1 - s))   for s in (0, 1),
    F(s) = 0 for s < 0,   F(s) = 1 for s >= 1,

because gamma = S / (1 + S) with S the sum of the children's conductances.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from src.errors import DegenerateAttractorError, DomainError, UsageError
from src.models.ifs_core import compose_maps

logger = logging.getLogger(__name__)

PROB_TOL = 1e-12
MIN_GRID = 64


class Boundary(Enum):
    """Conductance assigned to the vertices at the truncation depth."""

    FREE = 0.0
    WIRED = 1.0


@dataclass(frozen=True)
class OffspringDistribution:
    """Offspring law p_1..p_K; ``probs[k-1]`` is the probability of k children."""

    probs: Tuple[float, ...]

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.size < 1:
            raise DomainError("offspring distribution needs at least one probability")
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise DomainError(f"probabilities must lie in [0, 1], got {self.probs}")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise DomainError(f"probabilities sum to {probs.sum()}, not 1")
        if self.is_degenerate:
            logger.warning(
                "degenerate offspring law %s: every individual has %d children",
                self.probs, self.support[int(np.argmax(probs))],
            )

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> "OffspringDistribution":
        """Build from (k, p_k) pairs with k >= 1."""
        if not pairs:
            raise DomainError("offspring distribution needs at least one (k, p_k) pair")
        size = max(int(k) for k, _ in pairs)
        probs = [0.0] * size
        for k, p in pairs:
            if int(k) < 1 or int(k) != k:
                raise DomainError(f"offspring counts must be integers >= 1, got {k}")
            probs[int(k) - 1] += float(p)
        return cls(tuple(probs))

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "OffspringDistribution":
        """Read a JSON array of [k, p_k] pairs."""
        try:
            with open(path, "r") as f:
                pairs = json.load(f)
        except FileNotFoundError:
            raise UsageError(f"offspring file not found: {path}")
        except json.JSONDecodeError as e:
            raise UsageError(f"offspring file {path} is not valid JSON: {e}")
        return cls.from_pairs(pairs)

    @classmethod
    def binary(cls) -> "OffspringDistribution":
        """p_1 = p_2 = 1/2."""
        return cls((0.5, 0.5))

    @property
    def max_children(self) -> int:
        return len(self.probs)

    @property
    def support(self) -> np.ndarray:
        return np.arange(1, self.max_children + 1)

    @property
    def is_degenerate(self) -> bool:
        return any(p == 1.0 for p in self.probs)

    @property
    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(self.support, size=size, p=self.probs)


@dataclass
class GridCdf:
    """A c.d.f. sampled at s_i = i/N, i = 0..N, read as piecewise linear.

    ``values[0]`` is the right-continuous F(0): an atom at 0 is allowed.
    """

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 2:
            raise DomainError("a grid c.d.f. needs at least two values")
        if np.any(np.diff(self.values) < -PROB_TOL):
            raise DomainError("grid c.d.f. values must be nondecreasing")
        if abs(self.values[-1] - 1.0) > PROB_TOL:
            raise DomainError(f"grid c.d.f. must equal 1 at s = 1, got {self.values[-1]}")

    @classmethod
    def uniform(cls, grid_n: int) -> "GridCdf":
        return cls(np.linspace(0.0, 1.0, grid_n + 1))

    @classmethod
    def heaviside(cls, grid_n: int) -> "GridCdf":
        return cls(np.ones(grid_n + 1))

    @property
    def grid_n(self) -> int:
        return self.values.size - 1

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_n + 1)

    def __call__(self, s):
        """Evaluate by linear interpolation; 0 left of 0 and 1 from 1 on."""
        s = np.asarray(s, dtype=float)
        out = np.interp(s, self.grid, self.values)
        return np.where(s < 0.0, 0.0, np.where(s >= 1.0, 1.0, out))

    def cell_masses(self) -> np.ndarray:
        """Return [F(0), F(s_1) - F(s_0), ...]: the atom at 0, then each cell's mass."""
        return np.concatenate(([self.values[0]], np.diff(self.values)))

    def quantile(self, u: np.ndarray) -> np.ndarray:
        """Inverse c.d.f.: 0 on the atom, linear interpolation elsewhere."""
        u = np.asarray(u, dtype=float)
        out = np.interp(u, self.values, self.grid)
        return np.where(u <= self.values[0], 0.0, out)

    def median(self) -> float:
        return float(self.quantile(0.5))


@dataclass
class GwSample:
    """Generation sizes Z_1..Z_d of one Galton-Watson history."""

    sizes: List[int] = field(default_factory=list)

    @property
    def resistance(self) -> float:
        """Resistance sum_k 1/Z_k of the shorted tree, truncated at depth d."""
        return float(np.sum(1.0 / np.asarray(self.sizes, dtype=float)))

    @property
    def conductance(self) -> float:
        return 1.0 / self.resistance


def _convolve_cells(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Convolve two laws given as (atom at 0, uniform mass per cell) arrays.

    atom + atom stays an atom, atom + cell j is cell j, and cell i + cell j is
    a triangle on [(i+j-2)h, (i+j)h] whose mass splits evenly over cells
    i+j-1 and i+j. The result is exact at every grid point.
    """
    out = np.zeros(x.size + y.size - 1)
    out[0] = x[0] * y[0]
    out[1 : y.size] += x[0] * y[1:]
    out[1 : x.size] += y[0] * x[1:]
    cells = np.convolve(x[1:], y[1:])  # index m holds cell pairs with i + j = m + 2
    out[1 : cells.size + 1] += 0.5 * cells
    out[2 : cells.size + 2] += 0.5 * cells
    return out


def convolution_powers(f: GridCdf, k_max: int) -> List[np.ndarray]:
    """Return the grid c.d.f.s of F^{*1}..F^{*k_max}; F^{*k} lives on [0, k]."""
    base = f.cell_masses()
    masses = base
    powers = [np.cumsum(masses)]
    for _ in range(1, k_max):
        masses = _convolve_cells(masses, base)
        powers.append(np.cumsum(masses))
    return [np.minimum(power, 1.0) for power in powers]


def gw_operator_apply(f: GridCdf, off: OffspringDistribution) -> GridCdf:
    """Apply F -> sum_k p_k F^{*k}(s/(1 - s)) on the grid, with the boundary clauses."""
    n = f.grid_n
    s = f.grid
    with np.errstate(divide="ignore"):
        u = np.where(s < 1.0, s / (1.0 - s), np.inf)
    out = np.zeros(n + 1)
    for k, (p_k, power) in enumerate(zip(off.probs, convolution_powers(f, off.max_children)), start=1):
        if p_k == 0.0:
            continue
        extended_grid = np.arange(power.size) / n
        out += p_k * np.interp(u, extended_grid, power, right=1.0)
    out[-1] = 1.0
    return GridCdf(np.maximum.accumulate(np.minimum(out, 1.0)))


def sup_distance(f: GridCdf, g: GridCdf) -> float:
    return float(np.max(np.abs(f.values - g.values)))


def solve_gw_cdf(
    off: OffspringDistribution,
    grid_n: int = 4096,
    tol: float = 1e-6,
    max_iter: int = 2000,
    report_every: int = 25,
) -> Tuple[GridCdf, float]:
    """Iterate the functional equation from F(s) = s to the conductance c.d.f.

    Returns:
        Tuple of (last iterate, sup-norm residual of that iterate)

    Raises:
        DomainError: degenerate offspring law or grid too coarse
        DegenerateAttractorError: the iterates drift to the Heaviside solution,
            i.e. nearly all mass collects in the first grid cell
    """
    if grid_n < MIN_GRID:
        raise DomainError(f"grid must have at least {MIN_GRID} cells, got {grid_n}")
    if off.is_degenerate:
        raise DomainError("the solver needs every p_k < 1")
    current = GridCdf.uniform(grid_n)
    residual = np.inf
    for iteration in range(1, max_iter + 1):
        updated = gw_operator_apply(current, off)
        residual = sup_distance(updated, current)
        current = updated
        if iteration % report_every == 0:
            logger.info("gw iteration %d: residual %.3e, F(1/N) = %.6f", iteration, residual, current.values[1])
        # F(1/2) = 1 is legitimate (the binary law has sup gamma = 1/2); the
        # Heaviside attractor shows up as F(1/N) -> 1.
        if current.values[1] >= 1.0 - tol:
            raise DegenerateAttractorError(
                f"iteration {iteration}: F(1/N) = {current.values[1]} approaches the Heaviside solution",
                current,
            )
        if residual < tol:
            break
    else:
        logger.warning("gw solver stopped after %d iterations with residual %.3e", max_iter, residual)
    residual = sup_distance(gw_operator_apply(current, off), current)
    logger.info("gw solver finished: residual %.3e, median %.6f", residual, current.median())
    return current, residual


def _tree_conductances(
    off: OffspringDistribution, depth: int, boundary: Boundary, rng: np.random.Generator
) -> float:
    counts_by_level = []
    population = 1
    for _ in range(depth):
        counts = off.draw(rng, population)
        counts_by_level.append(counts)
        population = int(counts.sum())
    values = np.full(population, boundary.value)
    for counts in reversed(counts_by_level):
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        totals = np.add.reduceat(values, starts)
        values = totals / (1.0 + totals)
    return float(values[0])


def tree_conductance_mc(
    off: OffspringDistribution, depth: int, boundary: Boundary, rng: np.random.Generator
) -> float:
    """Conductance from the adjoined parent of a GW tree truncated at ``depth``.

    Leaves at the truncation depth carry conductance 0 (FREE, a lower bound) or
    1 (WIRED, an upper bound); every other vertex has C = S / (1 + S) with S the
    sum over its children. A FREE cut disconnects the root from infinity, so the
    FREE value is identically 0; WIRED values decrease to gamma as depth grows.
    """
    if depth < 1:
        raise DomainError(f"depth must be at least 1, got {depth}")
    return _tree_conductances(off, depth, boundary, rng)


def sample_tree_conductances(
    off: OffspringDistribution, depth: int, boundary: Boundary, rng: np.random.Generator, size: int
) -> np.ndarray:
    return np.array([tree_conductance_mc(off, depth, boundary, rng) for _ in range(size)])


def inverse_cdf_sample(f: GridCdf, rng: np.random.Generator, size: int) -> np.ndarray:
    return f.quantile(rng.random(size))


def ks_distance(samples: np.ndarray, f: GridCdf) -> float:
    """Kolmogorov-Smirnov distance between the empirical c.d.f. of samples and f."""
    return float(stats.kstest(samples, f).statistic)


def sample_haggstrom(
    f_gamma: GridCdf,
    depth: int,
    rng: np.random.Generator,
    size: int,
    force_zero: bool = False,
) -> np.ndarray:
    """Draw truncated continued fractions [1, g_1, 1, g_2, ..., 1, g_depth].

    Each g_i is 0 with probability 1/2 and otherwise a draw from ``f_gamma``
    (the law (H + F_gamma)/2 of the binary case).
    """
    shifts = np.where(rng.random((size, depth)) < 0.5, 0.0, f_gamma.quantile(rng.random((size, depth))))
    if force_zero:
        shifts = np.zeros_like(shifts)
    return compose_maps(shifts, 0.0)


def haggstrom_check(
    f_gamma: GridCdf, depth: int, samples: int, rng: np.random.Generator, force_zero: bool = False
) -> float:
    """KS distance between truncated continued fractions and the solved F_gamma."""
    if depth < 1 or samples < 1:
        raise DomainError("depth and samples must be positive")
    values = sample_haggstrom(f_gamma, depth, rng, samples, force_zero)
    return ks_distance(values, f_gamma)


def sample_generation_sizes(off: OffspringDistribution, depth: int, rng: np.random.Generator) -> GwSample:
    """Simulate Z_1..Z_depth from Z_0 = 1 with multinomial generation updates."""
    if depth < 1:
        raise DomainError(f"depth must be at least 1, got {depth}")
    sizes = []
    population = 1
    for _ in range(depth):
        tallies = rng.multinomial(population, off.probs)
        population = int(np.dot(off.support, tallies))
        sizes.append(population)
    return GwSample(sizes)


def shorted_resistance_sample(off: OffspringDistribution, depth: int, rng: np.random.Generator) -> float:
    """Return sum_{k <= depth} 1/Z_k for one simulated history."""
    return sample_generation_sizes(off, depth, rng).resistance
