import numpy as np
import pytest

from conftest import random_function
from gspfilter.grid import (Grid, GridAlignmentError, GridFunction, boundary_mass, check_boundary,
                            convolve, fourier, inner, inverse_fourier, modulate, norm, translate)


def _direct_fourier(f):
    # Riemann sum written out element by element, independent of the FFT path
    g = f.grid
    x, xi = g.x, g.xi
    out = np.empty(g.n, dtype=complex)
    for k in range(g.n):
        out[k] = (2 * np.pi) ** -0.5 * g.h * np.sum(f.values * np.exp(-1j * x * xi[k]))
    return out


def test_grid_geometry():
    g = Grid(64, 10.0)
    assert np.isclose(g.h * g.dxi, 2 * np.pi / g.n)
    assert g.x.size == g.xi.size == 64
    assert np.isclose(np.abs(g.xi).max(), np.pi / g.h)
    assert Grid(8, 1.0, dim=2).size == 64


@pytest.mark.parametrize("n", [0, 7, -2])
def test_grid_rejects_odd_or_empty(n):
    with pytest.raises(ValueError):
        Grid(n, 1.0)


def test_gaussian_is_fourier_fixed_point(grid64):
    f = grid64.function(lambda x: np.exp(-x**2 / 2))
    F = fourier(f)
    assert np.abs(F.values - np.exp(-grid64.xi**2 / 2)).max() < 1e-10


def test_delta_transform_is_flat(grid64):
    F = fourier(grid64.delta())
    assert np.allclose(F.values, (2 * np.pi) ** -0.5, atol=1e-14)


def test_modulated_gaussian_matches_direct_sum(grid64):
    f = grid64.function(lambda x: np.exp(-x**2 / 2) * np.cos(3 * x))
    F = fourier(f)
    assert np.abs(F.values - _direct_fourier(f)).max() < 1e-12
    xi = grid64.xi
    half = 0.5 * (np.exp(-(xi - 3) ** 2 / 2) + np.exp(-(xi + 3) ** 2 / 2))
    assert np.abs(F.values - half).max() < 1e-10


def test_round_trips(grid64, rng):
    f = random_function(grid64, rng)
    assert np.abs(inverse_fourier(fourier(f)).values - f.values).max() < 1e-12
    F = random_function(grid64, rng, "xi")
    assert np.abs(fourier(inverse_fourier(F)).values - F.values).max() < 1e-12


def test_flat_spectrum_inverts_to_delta(grid64):
    F = GridFunction(np.full(64, (2 * np.pi) ** -0.5), grid64, "xi")
    assert np.abs(inverse_fourier(F).values - grid64.delta().values).max() < 1e-12


def test_round_trip_2d(rng):
    g = Grid(16, 4.0, dim=2)
    f = random_function(g, rng)
    assert np.abs(inverse_fourier(fourier(f)).values - f.values).max() < 1e-12


def test_parseval(grid64, rng):
    f, g = random_function(grid64, rng), random_function(grid64, rng)
    lhs, rhs = inner(f, g), inner(fourier(f), fourier(g))
    assert abs(lhs - rhs) <= 1e-12 * norm(f) * norm(g)


def test_convolution_identity_and_gaussians(grid64, rng):
    f = random_function(grid64, rng)
    assert np.abs(convolve(f, grid64.delta()).values - f.values).max() < 1e-12
    g = grid64.function(lambda x: np.exp(-x**2 / 2))
    c = convolve(g, g)
    assert np.abs(c.values - np.sqrt(np.pi) * np.exp(-grid64.x**2 / 4)).max() < 1e-10


def test_convolution_theorem(grid64, rng):
    f, g = random_function(grid64, rng), random_function(grid64, rng)
    c = convolve(f, g)
    # direct circular sum h * sum_m f(x_m) g(x_j - x_m)
    n = grid64.n
    direct = np.array([grid64.h * sum(f.values[m] * g.values[(j - m + n // 2) % n] for m in range(n))
                       for j in range(n)])
    assert np.abs(c.values - direct).max() < 1e-10 * np.abs(direct).max()


def test_shift_theorem(grid64, rng):
    f = random_function(grid64, rng)
    x0 = 5 * grid64.h
    lhs = fourier(translate(f, x0))
    rhs = modulate(fourier(f), -x0)
    assert np.abs(lhs.values - rhs.values).max() < 1e-12
    assert np.array_equal(translate(f, 0).values, f.values)
    assert np.allclose(modulate(f, 0).values, f.values, atol=0)


def test_misaligned_shift_rejected(grid64, rng):
    f = random_function(grid64, rng)
    with pytest.raises(GridAlignmentError):
        translate(f, 0.3 * grid64.h)


def test_inner_is_squared_norm(grid64, rng):
    f = random_function(grid64, rng)
    v = inner(f, f)
    assert abs(v.imag) < 1e-12 and v.real >= 0
    assert np.isclose(v.real, norm(f) ** 2, rtol=1e-13)


def test_boundary_mass(grid64):
    narrow = grid64.function(lambda x: np.exp(-x**2 / 2))
    assert check_boundary(narrow)
    wide = grid64.function(lambda x: np.exp(-x**2 / 50))
    assert not check_boundary(wide)
    assert boundary_mass(grid64.zeros()) == 0.0
