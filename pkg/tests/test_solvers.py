import numpy as np
import pytest

from conftest import random_psd
from gspfilter.grid import Grid, GridFunction
from gspfilter.gsp import CovarianceOperator, NotPSDError, white_noise_cov, wss_cov
from gspfilter.solvers import (CommutationError, FilterSolution, RangeConditionError, SpectralFloorError,
                               lmmse_oracle, mc_mse, mc_trace_mse, mse, oracle_scale, residual,
                               residual_orthogonality, solve_commuting, solve_douglas, solve_general,
                               solve_wss)
from gspfilter.spectral import band, from_density, lebesgue, rn_filter, wss_mse


@pytest.fixture(scope="module")
def g16():
    return Grid(16, 4.0)


def _commuting_pair(n, rng, zeros=0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    du = rng.uniform(0.1, 2.0, n)
    dw = rng.uniform(0.1, 2.0, n)
    du[:zeros] = 0.0
    return (Q * du) @ Q.conj().T, (Q * dw) @ Q.conj().T


def _singular_pair(n, rng, null=3):
    # common null space of dimension `null`
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    B = Q[:, null:]
    Au = rng.standard_normal((n - null, n - null)) + 1j * rng.standard_normal((n - null, n - null))
    Aw = rng.standard_normal((n - null, 2)) + 1j * rng.standard_normal((n - null, 2))
    Ku = B @ (Au @ Au.conj().T) @ B.conj().T
    Kw = B @ (Aw @ Aw.conj().T) @ B.conj().T
    return 0.5 * (Ku + Ku.conj().T), 0.5 * (Kw + Kw.conj().T)


def test_identity_pair_gives_half():
    I = np.eye(6)
    for sol in (solve_commuting(I, I), solve_general(I, I), solve_douglas(I, I)):
        assert np.abs(sol.F - 0.5 * I).max() < 1e-14


def test_diagonal_separation():
    Ku, Kw = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    assert np.abs(solve_commuting(Ku, Kw).F - np.diag([1.0, 0.0])).max() < 1e-14
    assert np.abs(solve_general(Ku, Kw).F - np.diag([1.0, 0.0])).max() < 1e-14


def test_douglas_diagonal_cases():
    sol = solve_douglas(np.diag([1.0, 0.0]), np.diag([1.0, 0.0]))
    assert np.abs(sol.F - np.diag([0.5, 0.0])).max() < 1e-15 and sol.residual == 0.0
    sol = solve_douglas(np.diag([1.0, 0.0]), np.zeros((2, 2)))
    assert np.abs(sol.F - np.diag([1.0, 0.0])).max() < 1e-15


def test_wss_equal_measures_is_half_projection(g16):
    mu = band(g16, 0.0, 1.5)
    sol = solve_wss(mu, mu)
    assert np.allclose(sol.diagnostics["filter"].fhat, 0.5 * (mu.weights > 0), atol=0)
    P = solve_wss(mu, 0.0 * mu).F
    assert np.abs(sol.F - 0.5 * P).max() < 1e-14


def test_wss_agrees_with_general_and_commuting(g16, rng):
    for _ in range(3):
        mu_u = from_density(g16, lambda xi: rng.uniform(0.5, 2) * np.exp(-xi**2 / rng.uniform(1, 4)))
        mu_w = lebesgue(g16, rng.uniform(0.2, 1.0))
        Ku, Kw = wss_cov(mu_u), wss_cov(mu_w)
        F = solve_wss(mu_u, mu_w).F
        assert solve_wss(mu_u, mu_w).residual <= 1e-10 * np.linalg.norm(Ku.matrix, 2)
        assert np.abs(F - solve_general(Ku, Kw).F).max() <= 1e-8
        assert np.abs(F - solve_commuting(Ku, Kw).F).max() <= 1e-8


def test_commuting_spectrum_in_unit_interval(rng):
    Ku, Kw = _commuting_pair(20, rng, zeros=4)
    sol = solve_commuting(Ku, Kw)
    assert sol.residual <= 1e-8 * np.linalg.norm(Ku, 2)
    H = 0.5 * (sol.F + sol.F.conj().T)
    ev = np.linalg.eigvalsh(H)
    assert ev.min() >= -1e-8 and ev.max() <= 1 + 1e-8


def test_commuting_rejects_bad_inputs(rng):
    A, B = random_psd(8, rng), random_psd(8, rng)
    with pytest.raises(CommutationError):
        solve_commuting(A, B)
    with pytest.raises(NotPSDError):
        solve_commuting(np.diag([1.0, -1.0]), np.eye(2))


def test_general_residual_and_floor(rng):
    Ku, Kw = random_psd(12, rng), random_psd(12, rng, floor=0.1)
    sol = solve_general(Ku, Kw)
    assert sol.residual <= 1e-10 * np.linalg.norm(Ku, 2)
    assert sol.spectral_floor >= 0.1 - 1e-12
    with pytest.raises(SpectralFloorError):
        solve_general(np.diag([1.0, 0.0]), np.diag([1.0, 0.0]))


def test_douglas_engineered_null_space(rng):
    Ku, Kw = _singular_pair(12, rng)
    sol = solve_douglas(Ku, Kw)
    d = sol.diagnostics
    assert sol.residual <= 1e-8 * np.linalg.norm(Ku, 2)
    assert d["rank"] == 9
    assert d["ran_FH_residual"] <= 1e-8
    assert d["ker_angle"] <= 1e-8
    assert d["kernel_inclusion"] <= 1e-12
    assert d["norm_gap"] <= 1e-8


def test_douglas_range_failure_rejected():
    # Ku + Kw = diag(1, 0) while ran Ku has a component along e2
    Ku = np.array([[1.0, 1.0], [1.0, 1.0]])
    Kw = np.array([[0.0, -1.0], [-1.0, -1.0]])
    with pytest.raises(RangeConditionError):
        solve_douglas(Ku, Kw)


def test_residual_orthogonality_exact_and_perturbed(g16, rng):
    Ku, Kw = random_psd(16, rng), random_psd(16, rng, floor=0.2)
    F = solve_general(Ku, Kw).F
    assert residual_orthogonality(F, Ku, Kw).residual <= 1e-10 * np.linalg.norm(Ku, 2)
    E = rng.standard_normal((16, 16))
    E /= np.linalg.norm(E, 2)
    Fp = F + 1e-2 * E
    rep = residual_orthogonality(Fp, Ku, Kw)
    assert np.isclose(rep.residual, np.linalg.norm(1e-2 * E @ (Ku + Kw), 2), rtol=1e-8)
    cu, cw = CovarianceOperator(Ku, g16), CovarianceOperator(Kw, g16)
    mc = mc_trace_mse([F, Fp], cu, cw, N=20_000, seed=4)
    assert mc[1] > mc[0]


def test_monte_carlo_orthogonality_wss(g16):
    mu_u, mu_w = from_density(g16, lambda xi: 3 * np.exp(-xi**2 / 2)), lebesgue(g16, 0.5)
    sol = solve_wss(mu_u, mu_w)
    rep = residual_orthogonality(sol.F, wss_cov(mu_u), wss_cov(mu_w), N=100_000, seed=9)
    assert rep.ok and rep.mc_max <= rep.mc_bound


def test_mse_forms(g16, rng):
    I = np.eye(16) / g16.h
    phi = GridFunction(np.zeros(16), g16)
    phi.values[3] = 1 / np.sqrt(g16.h)
    assert np.isclose(mse(0.5 * np.eye(16), I, I, phi), 0.5, rtol=1e-14)
    mu_u, mu_w = from_density(g16, lambda xi: 2 * np.exp(-xi**2)), lebesgue(g16, 0.3)
    F = solve_wss(mu_u, mu_w).F
    psi = g16.function(lambda x: np.exp(-(x - 0.5) ** 2))
    ref = wss_mse(rn_filter(mu_u, mu_w), psi, mu_u, mu_w)
    assert abs(mse(F, wss_cov(mu_u), wss_cov(mu_w), psi) - ref) <= 1e-9 * ref
    Ku, Kw = random_psd(16, rng), random_psd(16, rng, floor=0.1)
    F = solve_general(Ku, Kw).F
    for _ in range(5):
        x = GridFunction(rng.standard_normal(16) + 1j * rng.standard_normal(16), g16)
        assert mse(F, Ku, Kw, x) >= 0
        assert mse(F + 0.05, Ku, Kw, x) >= mse(F, Ku, Kw, x)


def test_mc_mse_matches_formula(g16, rng):
    Ku, Kw = random_psd(16, rng), random_psd(16, rng, floor=0.1)
    F = solve_general(Ku, Kw).F
    phi = g16.function(lambda x: np.exp(-x**2))
    m, se = mc_mse(F, CovarianceOperator(Ku, g16), CovarianceOperator(Kw, g16), phi, N=100_000, seed=2)
    assert abs(m - mse(F, Ku, Kw, phi)) <= 3 * se


def test_oracle_cases(g16, rng):
    N = 100_000
    I = white_noise_cov(g16, 1.0)
    sol = lmmse_oracle(I, I, N, seed=1)
    scale = oracle_scale(I, I)
    assert np.abs(sol.F - 0.5 * np.eye(16)).max() <= 10 * scale / np.sqrt(N)
    Ku, Kw = random_psd(16, rng), random_psd(16, rng, floor=0.2)
    cu, cw = CovarianceOperator(Ku, g16), CovarianceOperator(Kw, g16)
    ref = solve_general(cu, cw).F
    est = lmmse_oracle(cu, cw, N, seed=2).F
    assert np.abs(est - ref).max() <= 10 * oracle_scale(Ku, Kw, ref) / np.sqrt(N)


def test_oracle_wss_is_circulant(g16):
    N = 100_000
    mu_u, mu_w = from_density(g16, lambda xi: 3 * np.exp(-xi**2 / 2)), lebesgue(g16, 0.5)
    Ku, Kw = wss_cov(mu_u), wss_cov(mu_w)
    est = lmmse_oracle(Ku, Kw, N, seed=3).F
    tol = 10 * oracle_scale(Ku, Kw) / np.sqrt(N)
    n = 16
    for d in range(n):
        diag = np.array([est[j, (j + d) % n] for j in range(n)])
        assert np.abs(diag - diag.mean()).max() <= 2 * tol


def test_solution_serialization(g16, tmp_path):
    mu = from_density(g16, lambda xi: np.exp(-xi**2))
    sol = solve_wss(mu, lebesgue(g16, 0.5))
    sol.save(tmp_path / "f")
    back = FilterSolution.load(tmp_path / "f")
    assert np.array_equal(back.F, sol.F) and back.method == "wss-rn"
    assert back.residual == sol.residual
    assert residual(back.F, wss_cov(mu), wss_cov(lebesgue(g16, 0.5))) == sol.residual
