"""Shared fixtures: seeded generators and random system factories."""

import numpy as np
import pytest

from test_utils import setup_test_paths

setup_test_paths()

from linalg_core import HermitianMatrix, PsdMatrix, hermitize  # noqa: E402
from ness_fermion import Statistics, SystemSpec  # noqa: E402


def random_hermitian(rng: np.random.Generator, m: int, scale: float = 1.0) -> np.ndarray:
    X = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return scale * hermitize(X) / np.sqrt(m)


def random_positive(rng: np.random.Generator, m: int, floor: float = 0.0) -> np.ndarray:
    W = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2 * m)
    return hermitize(W @ W.conj().T) + floor * np.eye(m)


def make_spec(rng: np.random.Generator, m: int, statistics: str = "fermion",
              h_scale: float = 1.0) -> SystemSpec:
    """Random full-rank system; bosonic systems get D = P + A with P > 0."""
    H = HermitianMatrix(random_hermitian(rng, m, h_scale))
    A = random_positive(rng, m, floor=0.05)
    if statistics == "boson":
        D = A + random_positive(rng, m, floor=0.1)
    else:
        D = random_positive(rng, m, floor=0.05)
    return SystemSpec(H=H, A=PsdMatrix(A), D=PsdMatrix(D), statistics=Statistics(statistics))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def spec_factory(rng):
    def factory(m: int = 4, statistics: str = "fermion", h_scale: float = 1.0) -> SystemSpec:
        return make_spec(rng, m, statistics, h_scale)

    return factory


@pytest.fixture
def scalar_spec():
    def factory(a: float, d: float, h: float = 0.0, statistics: str = "fermion") -> SystemSpec:
        return SystemSpec.from_arrays([[h]], [[a]], [[d]], statistics=statistics)

    return factory
