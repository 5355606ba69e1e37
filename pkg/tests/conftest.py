"""Shared fixtures: seeded random streams and a solved binary conductance c.d.f."""

import pytest

from src.models.gw_conductance import OffspringDistribution, solve_gw_cdf
from src.utils.rng import rng_stream

TEST_SEED = 20240601


@pytest.fixture
def rng():
    return rng_stream(TEST_SEED, 0)


@pytest.fixture
def make_rng():
    """Factory for independent seeded streams keyed by integers."""

    def _make(*key):
        return rng_stream(TEST_SEED, *key)

    return _make


@pytest.fixture(scope="session")
def binary_offspring():
    return OffspringDistribution.binary()


@pytest.fixture(scope="session")
def binary_gw_solution(binary_offspring):
    """F_gamma for p_1 = p_2 = 1/2 on a 4096-cell grid, with its residual."""
    return solve_gw_cdf(binary_offspring, grid_n=4096, tol=1e-6, max_iter=2000)
