import numpy as np
import pytest

from gspfilter.grid import Grid, GridFunction


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def grid64():
    return Grid(64, 10.0)


def random_function(grid: Grid, rng, domain: str = "x") -> GridFunction:
    v = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return GridFunction(v, grid, domain)


def random_psd(n: int, rng, rank=None, floor: float = 0.0) -> np.ndarray:
    k = n if rank is None else rank
    A = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    K = A @ A.conj().T / k
    return 0.5 * (K + K.conj().T) + floor * np.eye(n)
