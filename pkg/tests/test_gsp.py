import numpy as np
import pytest

from conftest import random_psd
from gspfilter.grid import Grid, GridFunction
from gspfilter.gsp import (CovarianceOperator, NotPSDError, derivative_noise_cov, empirical_covariance,
                           empirical_cross_covariance, fourier_multiplier_operator, iter_samples, pair,
                           sample, white_noise_cov, wss_cov)
from gspfilter.io import read_ensemble_binary, write_ensemble_binary
from gspfilter.spectral import band, fl2_norm, from_density, lebesgue, power_law, rn_filter, \
    stationary_process_error

N = 100_000


@pytest.fixture(scope="module")
def g32():
    return Grid(32, 8.0)


def _shift_matrix(g, m):
    return np.roll(np.eye(g.n), m, axis=0)


def test_constructors_agree(grid64):
    p = 0.8
    assert np.abs(wss_cov(lebesgue(grid64, p)).matrix - white_noise_cov(grid64, p).matrix).max() < 1e-12
    for alpha in (1, 2):
        D = derivative_noise_cov(grid64, p, alpha).matrix
        W = wss_cov(power_law(grid64, alpha, p)).matrix
        assert np.abs(D - W).max() <= 1e-12 * np.abs(W).max()


def test_white_noise_acts_as_scalar(grid64, rng):
    C = white_noise_cov(grid64, 2.5)
    phi = GridFunction(rng.standard_normal(64), grid64)
    assert np.allclose(C.apply(phi).values, 2.5 * phi.values, rtol=1e-14)


def test_wss_cov_commutes_with_translation(grid64, rng):
    mu = from_density(grid64, lambda xi: np.exp(-xi**2) + 0.1)
    K = wss_cov(mu).op
    S = _shift_matrix(grid64, 3)
    assert np.abs(K @ S - S @ K).max() < 1e-12 * np.abs(K).max()


def test_constructor_errors(grid64):
    with pytest.raises(ValueError):
        white_noise_cov(grid64, 0.0)
    with pytest.raises(ValueError):
        derivative_noise_cov(grid64, -1.0, 1)
    with pytest.raises(NotPSDError):
        CovarianceOperator(-np.eye(64), grid64)
    with pytest.raises(ValueError):
        CovarianceOperator(np.triu(np.ones((64, 64))), grid64)


def test_fourier_multiplier_identity(grid64):
    assert np.abs(fourier_multiplier_operator(grid64, np.ones(64)) - np.eye(64)).max() < 1e-12


def test_white_noise_sampling_converges(g32):
    C = white_noise_cov(g32, 1.0)
    ens = sample(C, N, seed=7)
    emp = empirical_covariance(ens).matrix
    scale = 1.0 / g32.h
    assert np.abs(emp - C.matrix).max() <= 5 * N**-0.5 * scale
    pseudo = ens.samples.T @ ens.samples / N
    assert np.abs(pseudo).max() <= 5 * N**-0.5 * scale
    assert np.abs(ens.mean()).max() <= 5 * N**-0.5 * np.sqrt(scale)


def test_dense_sampling_converges(g32, rng):
    K = random_psd(32, rng, rank=20)
    C = CovarianceOperator(K, g32)
    emp = empirical_covariance(sample(C, N, seed=3)).matrix
    assert np.abs(emp - K).max() <= 5 * N**-0.5 * np.abs(K).max() * 2


def test_pair_variance_matches_fl2(g32):
    mu = from_density(g32, lambda xi: 2.0 * np.exp(-xi**2 / 2))
    ens = sample(wss_cov(mu), N, seed=11)
    phi = g32.function(lambda x: np.exp(-(x - 1) ** 2))
    v = pair(ens, phi)
    target = fl2_norm(phi, mu) ** 2
    assert abs(np.mean(np.abs(v) ** 2) - target) <= 5 * N**-0.5 * target
    assert np.all(pair(ens, g32.zeros()) == 0)


def test_independent_streams_uncorrelated(g32):
    mu = lebesgue(g32, 1.0)
    a = sample(wss_cov(mu), N, seed=5, stream=0)
    b = sample(wss_cov(mu), N, seed=5, stream=1)
    phi = g32.function(lambda x: np.exp(-x**2))
    psi = g32.function(lambda x: np.exp(-(x - 0.5) ** 2))
    c = np.mean(pair(a, phi) * pair(b, psi).conj())
    scale = np.sqrt(np.mean(np.abs(pair(a, phi)) ** 2) * np.mean(np.abs(pair(b, psi)) ** 2))
    assert abs(c) <= 5 * N**-0.5 * scale
    X = empirical_cross_covariance(a, b)
    assert np.abs(X).max() <= 5 * N**-0.5 / g32.h


def test_sampling_is_deterministic(g32, monkeypatch, rng):
    K = random_psd(32, rng)
    C = CovarianceOperator(K, g32)
    ref = sample(C, 5000, seed=123).samples
    for threads in ("1", "3"):
        monkeypatch.setenv("GSP_THREADS", threads)
        assert np.array_equal(sample(C, 5000, seed=123).samples, ref)
    assert np.array_equal(sample(C, 5000, seed=123, threads=4).samples, ref)
    chunks = np.concatenate([c for _, c in iter_samples(C, 5000, seed=123, chunk_blocks=1)])
    assert np.array_equal(chunks, ref)
    assert not np.array_equal(sample(C, 5000, seed=124).samples, ref)


def test_stationary_error_monte_carlo(g32):
    mu_u = band(g32, 0.0, 1.0, 1.0)
    mu_w = lebesgue(g32, 1.0)
    filt = rn_filter(mu_u, mu_w)
    F = fourier_multiplier_operator(g32, filt.fhat)
    u = sample(wss_cov(mu_u), N, seed=1, stream=0).samples
    w = sample(wss_cov(mu_w), N, seed=1, stream=1).samples
    err = np.abs((u + w) @ F.T - u) ** 2
    per_sample = err.mean(axis=1)
    expect = stationary_process_error(filt, mu_u, mu_w).error
    se = per_sample.std() / np.sqrt(N)
    assert abs(per_sample.mean() - expect) <= 5 * se


def test_ensemble_binary_round_trip(g32, tmp_path):
    ens = sample(white_noise_cov(g32), 10, seed=0)
    write_ensemble_binary(tmp_path / "e.bin", ens.samples, g32)
    samples, grid = read_ensemble_binary(tmp_path / "e.bin")
    assert grid == g32 and np.array_equal(samples, ens.samples)
