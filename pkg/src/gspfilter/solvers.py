"""Solvers for the filter equation ``K_u = F (K_u + K_w)``.

``F`` is the matrix acting on sample vectors: the estimate of ``u`` from
``v = u + w`` is ``F v``.  Covariances may be given as
:class:`~gspfilter.gsp.CovarianceOperator` objects or as plain kernel
matrices; the equation is homogeneous, so the kernel and operator views give
the same ``F``.

Routes
------
``wss-rn``
    Fourier multiplier with the Radon-Nikodym response.
``commuting-spectral``
    Joint diagonalization of commuting covariances through the normal matrix
    ``K_u + i K_w``.
``general-inverse``
    ``K_u (K_u + K_w)^{-1}`` under a spectral floor.
``douglas-pinv``
    ``K_u (K_u + K_w)^+`` when only the range condition holds.
``oracle``
    Monte Carlo solution of the empirical normal equations.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.linalg as sla

from . import _backend
from .grid import Grid, GridFunction
from .gsp import CovarianceOperator, NotPSDError, _herk, fourier_multiplier_operator, iter_samples, wss_cov
from .io import read_array2, write_array2
from .spectral import ConsistencyError, SpectralMeasure, rn_filter

__all__ = [
    "FilterSolution",
    "SpectralFloorError",
    "RangeConditionError",
    "CommutationError",
    "solve_wss",
    "solve_commuting",
    "solve_general",
    "solve_douglas",
    "residual",
    "residual_orthogonality",
    "OrthogonalityReport",
    "mse",
    "mc_mse",
    "mc_trace_mse",
    "lmmse_oracle",
    "oracle_scale",
]

Cov = Union[CovarianceOperator, np.ndarray]


class SpectralFloorError(ValueError):
    """``K_u + K_w`` is not bounded below; use :func:`solve_douglas`."""


class RangeConditionError(ValueError):
    """``ran K_u`` is not contained in ``ran(K_u + K_w)``: no bounded solution exists."""


class CommutationError(ValueError):
    """The covariances do not commute within tolerance."""


def _mat(K: Cov) -> np.ndarray:
    return K.matrix if isinstance(K, CovarianceOperator) else np.asarray(K, dtype=complex)


def _grid(*objs) -> Optional[Grid]:
    for o in objs:
        if isinstance(o, CovarianceOperator):
            return o.grid
    return None


def _norm2(A: np.ndarray) -> float:
    return float(np.linalg.norm(A, 2)) if A.size else 0.0


def _check_psd(K: np.ndarray, name: str, tol: float = 1e-10) -> None:
    lam = np.linalg.eigvalsh(0.5 * (K + K.conj().T))
    if lam.size and lam[0] < -tol * max(abs(lam[-1]), abs(lam[0]), np.finfo(float).tiny):
        raise NotPSDError(f"{name} has eigenvalue {lam[0]:.3e}")


def residual(F: np.ndarray, Ku: Cov, Kw: Cov) -> float:
    """Spectral norm of ``K_u - F (K_u + K_w)``."""
    A, B = _mat(Ku), _mat(Kw)
    return _norm2(A - F @ (A + B))


@dataclass
class FilterSolution:
    """Filter matrix with diagnostics.

    Attributes
    ----------
    F : ndarray
        Matrix acting on sample vectors.
    method : str
    residual : float
        ``||K_u - F (K_u + K_w)||`` (spectral norm).
    spectral_floor : float or None
        Smallest eigenvalue of ``K_u + K_w`` when computed.
    range_ok : bool or None
        Outcome of the range check (Douglas route).
    norm_sup : float or None
        ``sup ||K_u f|| / ||(K_u + K_w) f||`` (Douglas route).
    diagnostics : dict
        Method-specific extras.
    """

    F: np.ndarray
    method: str
    residual: float
    spectral_floor: Optional[float] = None
    range_ok: Optional[bool] = None
    norm_sup: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)
    grid: Optional[Grid] = None

    def summary(self) -> dict:
        def num(v):
            return None if v is None else float(v)

        return {
            "method": self.method,
            "residual": num(self.residual),
            "spectral_floor": num(self.spectral_floor),
            "range_ok": self.range_ok,
            "norm_sup": num(self.norm_sup),
        }

    def save(self, stem, grid: Optional[Grid] = None) -> None:
        """Write ``stem.bin`` (operator) and ``stem.json`` (diagnostics)."""
        g = grid or self.grid
        if g is None:
            raise ValueError("a grid is needed to serialize the operator")
        write_array2(f"{stem}.bin", self.F, g)
        with open(f"{stem}.json", "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, stem) -> "FilterSolution":
        F, g = read_array2(f"{stem}.bin")
        with open(f"{stem}.json") as fh:
            d = json.load(fh)
        return cls(F, d["method"], d["residual"], d["spectral_floor"], d["range_ok"], d["norm_sup"], grid=g)


# routes ------------------------------------------------------------------------

def solve_wss(mu_u: SpectralMeasure, mu_w: SpectralMeasure, tau: Optional[float] = None,
              check: bool = True) -> FilterSolution:
    """Convolution filter with response ``d mu_u / d(mu_u + mu_w)``."""
    filt = rn_filter(mu_u, mu_w, tau)
    g = mu_u.grid
    F = fourier_multiplier_operator(g, filt.fhat)
    res = residual(F, wss_cov(mu_u), wss_cov(mu_w)) if check else float("nan")
    return FilterSolution(F, "wss-rn", res, diagnostics={"tau": filt.tau, "filter": filt}, grid=g)


def solve_commuting(Ku: Cov, Kw: Cov, tau: Optional[float] = None, comm_tol: float = 1e-8) -> FilterSolution:
    """Filter from the joint spectral decomposition of commuting covariances.

    Diagonalizes the normal matrix ``N = K_u + i K_w`` by a complex Schur
    decomposition; eigenvalues ``z`` carry ``(Re z, Im z)`` = the two
    spectral values and ``F = V diag(f(z)) V^H`` with
    ``f = Re z / (Re z + Im z)`` where ``Re z > tau`` and zero elsewhere.
    """
    A, B = _mat(Ku), _mat(Kw)
    na, nb = _norm2(A), _norm2(B)
    comm = _norm2(A @ B - B @ A)
    if comm > comm_tol * na * nb:
        raise CommutationError(f"commutator norm {comm:.3e} exceeds {comm_tol:g} * |Ku| |Kw|")
    _check_psd(A, "Ku")
    _check_psd(B, "Kw")
    T, Z = sla.schur(A + 1j * B, output="complex")
    z = np.diag(T)
    fu = z.real
    fw = np.clip(z.imag, 0.0, None)
    if tau is None:
        tau = 1e-12 * float(np.max(fu + fw)) if z.size else 0.0
    on = fu > tau
    f = np.zeros(z.size)
    f[on] = np.clip(fu[on] / (fu[on] + fw[on]), 0.0, 1.0)
    F = (Z * f) @ Z.conj().T
    offdiag = float(np.abs(np.triu(T, 1)).max()) if z.size > 1 else 0.0
    return FilterSolution(F, "commuting-spectral", residual(F, A, B), grid=_grid(Ku, Kw),
                          diagnostics={"tau": tau, "commutator": comm, "schur_offdiag": offdiag, "spectrum": f})


def solve_general(Ku: Cov, Kw: Cov, eps: Optional[float] = None) -> FilterSolution:
    """``F = K_u (K_u + K_w)^{-1}``; requires ``lambda_min(K_u + K_w) >= eps``.

    The default floor is ``1e-10 ||K_u + K_w||``.
    """
    A, B = _mat(Ku), _mat(Kw)
    V = A + B
    lam = np.linalg.eigvalsh(0.5 * (V + V.conj().T))
    top = float(np.max(np.abs(lam))) if lam.size else 0.0
    if eps is None:
        eps = 1e-10 * top
    floor = float(lam[0]) if lam.size else 0.0
    if floor < eps or top == 0:
        raise SpectralFloorError(
            f"lambda_min(Ku + Kw) = {floor:.3e} < {eps:.3e}; the inverse route does not apply, use solve_douglas")
    # F V = A  <=>  V^H F^H = A^H, and V is Hermitian
    F = sla.solve(V, A.conj().T, assume_a="her").conj().T
    return FilterSolution(F, "general-inverse", residual(F, A, B), spectral_floor=floor, grid=_grid(Ku, Kw),
                          diagnostics={"eps": eps})


def _null_basis(M: np.ndarray, tol_abs: float) -> np.ndarray:
    U, s, Vh = np.linalg.svd(M)
    r = int(np.sum(s > tol_abs))
    return Vh[r:].conj().T


def _angle(X: np.ndarray, Y: np.ndarray) -> float:
    if X.shape[1] != Y.shape[1]:
        return float(np.pi / 2)
    if X.shape[1] == 0:
        return 0.0
    return float(np.max(sla.subspace_angles(X, Y)))


def solve_douglas(Ku: Cov, Kw: Cov, svd_tol: float = 1e-10, check_psd: bool = True) -> FilterSolution:
    """Canonical solution ``F = K_u (K_u + K_w)^+`` under the range condition.

    Parameters
    ----------
    svd_tol : float
        Relative rank tolerance; singular values below ``svd_tol * sigma_max``
        of ``K_u + K_w`` count as zero.

    Raises
    ------
    RangeConditionError
        When ``rank [K_u + K_w | K_u] > rank(K_u + K_w)``.
    NotPSDError
        When the range condition holds but an input is not PSD.

    Notes
    -----
    The diagnostics verify the three uniqueness conditions: ``ran F^H``
    inside ``ran(K_u + K_w)``, ``ker F^H = ker K_u`` (largest principal angle)
    and ``||F|| = sup ||K_u f|| / ||(K_u + K_w) f||``, together with the
    kernel inclusion ``ker(K_u + K_w) in ker K_u and ker K_w``.
    """
    A, B = _mat(Ku), _mat(Kw)
    V = A + B
    U, s, Vh = np.linalg.svd(V)
    smax = float(s[0]) if s.size else 0.0
    tol_abs = svd_tol * smax
    r = int(np.sum(s > tol_abs))
    s_aug = np.linalg.svd(np.hstack([V, A]), compute_uv=False)
    r_aug = int(np.sum(s_aug > tol_abs))
    Ur = U[:, :r]
    range_gap = _norm2(A - Ur @ (Ur.conj().T @ A))
    if r_aug > r:
        raise RangeConditionError(
            f"rank [Ku+Kw | Ku] = {r_aug} > rank(Ku+Kw) = {r}; ran Ku is not inside ran(Ku+Kw)")
    if check_psd:
        _check_psd(A, "Ku")
        _check_psd(B, "Kw")
    Vr = Vh[:r].conj().T
    pinv = (Vr / s[:r]) @ Ur.conj().T
    F = A @ pinv
    FH = F.conj().T
    nF = _norm2(F)
    scaleF = max(nF, np.finfo(float).tiny)
    # ran F^H in closure of ran(Ku + Kw); V is Hermitian so ran V = span(Ur)
    ran_res = _norm2(FH - Ur @ (Ur.conj().T @ FH)) / scaleF
    ker_angle = _angle(_null_basis(FH, svd_tol * scaleF), _null_basis(A, svd_tol * max(_norm2(A), 1e-300)))
    # sup over f orthogonal to ker V of ||Ku f|| / ||V f||
    norm_sup = _norm2(A @ Ur / s[:r]) if r else 0.0
    Nv = U[:, r:]
    incl = max(_norm2(A @ Nv), _norm2(B @ Nv)) / max(smax, 1e-300) if Nv.shape[1] else 0.0
    diag = {
        "rank": r,
        "rank_augmented": r_aug,
        "range_gap": range_gap,
        "ran_FH_residual": ran_res,
        "ker_angle": ker_angle,
        "norm_F": nF,
        "norm_gap": abs(nF - norm_sup) / max(norm_sup, 1e-300) if r else 0.0,
        "kernel_inclusion": incl,
        "svd_tol": svd_tol,
    }
    return FilterSolution(F, "douglas-pinv", residual(F, A, B), spectral_floor=float(s[-1]) if s.size else None,
                          range_ok=True, norm_sup=norm_sup, diagnostics=diag, grid=_grid(Ku, Kw))


# diagnostics -------------------------------------------------------------------

@dataclass
class OrthogonalityReport:
    residual: float
    relative: float
    mc_max: Optional[float] = None
    mc_bound: Optional[float] = None

    @property
    def ok(self) -> bool:
        good = self.relative <= 1e-8
        if self.mc_max is not None:
            good = good and self.mc_max <= self.mc_bound
        return good


def _covariance_pair(Ku: Cov, Kw: Cov, grid: Optional[Grid]):
    g = grid or _grid(Ku, Kw)
    if g is None:
        raise ValueError("a grid is needed for Monte Carlo checks")
    cu = Ku if isinstance(Ku, CovarianceOperator) else CovarianceOperator(Ku, g)
    cw = Kw if isinstance(Kw, CovarianceOperator) else CovarianceOperator(Kw, g)
    return cu, cw, g


def _paired_chunks(cu, cw, N, seed, threads=None):
    for (_, U), (_, W) in zip(iter_samples(cu, N, seed, 0, threads=threads),
                              iter_samples(cw, N, seed, 1, threads=threads)):
        yield U, W


def residual_orthogonality(F: np.ndarray, Ku: Cov, Kw: Cov, N: int = 0, seed: int = 0,
                           grid: Optional[Grid] = None, threads: Optional[int] = None) -> OrthogonalityReport:
    """Cross-covariance of the error ``u - F v`` with the data ``v``.

    The theoretical value is ``R = K_u - F (K_u + K_w)``.  With ``N > 0`` the
    empirical cross-covariance over ``N`` realizations is also formed and
    compared entrywise against ``5 N^{-1/2} sqrt(max diag C_e max diag C_v)``.
    """
    A, B = _mat(Ku), _mat(Kw)
    res = residual(F, A, B)
    rep = OrthogonalityReport(res, res / max(_norm2(A), 1e-300))
    if N > 0:
        cu, cw, g = _covariance_pair(Ku, Kw, grid)
        I = np.eye(A.shape[0])
        Ce = (I - F) @ A @ (I - F).conj().T + F @ B @ F.conj().T
        scale = np.sqrt(np.max(np.real(np.diag(Ce))) * np.max(np.real(np.diag(A + B))))
        acc = np.zeros_like(A)
        FT = F.T.copy()
        for U, W in _paired_chunks(cu, cw, N, seed, threads):
            Vs = U + W
            E = U - Vs @ FT
            acc += E.T @ Vs.conj()
        rep.mc_max = float(np.abs(acc / N).max())
        rep.mc_bound = float(5 * scale / np.sqrt(N))
    return rep


def mse(F: np.ndarray, Ku: Cov, Kw: Cov, phi: GridFunction, grid: Optional[Grid] = None,
        exact: Optional[bool] = None, tol: float = 1e-9) -> float:
    """Mean square error ``E |(u - F v, phi)|^2``.

    For an exact solution the three expressions ``((K_u - F K_v F^H) phi, phi)``,
    ``((I - F) K_u phi, phi)`` and ``(F K_w phi, phi)`` coincide; their
    agreement to ``tol`` (relative to ``(K_v phi, phi)``) is asserted.  For any
    other ``F`` the full error covariance
    ``K_u - F K_u - K_u F^H + F K_v F^H`` is used.

    ``exact`` defaults to whether the residual is below ``1e-8 ||K_u||``.
    """
    A, B = _mat(Ku), _mat(Kw)
    g = grid or _grid(Ku, Kw) or phi.grid
    w2 = g.weight("x") ** 2
    x = phi.values.ravel()
    V = A + B

    def q(M):
        return w2 * np.vdot(x, M @ x)

    if exact is None:
        exact = residual(F, A, B) <= 1e-8 * max(_norm2(A), 1e-300)
    if not exact:
        FH = F.conj().T
        return float(np.real(q(A - F @ A - A @ FH + F @ V @ FH)))
    j1 = q(A - F @ V @ F.conj().T)
    j2 = q((np.eye(A.shape[0]) - F) @ A)
    j3 = q(F @ B)
    scale = abs(q(V)) + 1e-300
    spread = max(abs(j1 - j2), abs(j1 - j3), abs(j2 - j3))
    if spread > tol * scale:
        raise ConsistencyError(f"error expressions disagree by {spread / scale:.3e} (relative)")
    return float(np.real(j1))


def mc_mse(F: np.ndarray, Ku: Cov, Kw: Cov, phi: GridFunction, N: int, seed: int,
           grid: Optional[Grid] = None, threads: Optional[int] = None):
    """Empirical ``E |(u - F v, phi)|^2`` and its standard error."""
    cu, cw, g = _covariance_pair(Ku, Kw, grid)
    wt = g.weight("x")
    x = phi.values.ravel().conj()
    # (u - F v, phi) = h^d (u - F v) . conj(phi) = h^d (u . conj(phi) - v . (F^T conj(phi)))
    y = F.T @ x
    vals = []
    for U, W in _paired_chunks(cu, cw, N, seed, threads):
        vals.append(np.abs(wt * (U @ x - (U + W) @ y)) ** 2)
    e = np.concatenate(vals)
    return float(e.mean()), float(e.std(ddof=1) / np.sqrt(e.size))


def mc_trace_mse(Fs, Ku: Cov, Kw: Cov, N: int, seed: int, grid: Optional[Grid] = None,
                 threads: Optional[int] = None) -> np.ndarray:
    """Empirical ``E ||u - F v||^2`` (grid norm) for each ``F`` in ``Fs`` on common samples."""
    cu, cw, g = _covariance_pair(Ku, Kw, grid)
    wt = g.weight("x")
    Fs = [np.asarray(F) for F in Fs]
    out = np.zeros(len(Fs))
    for U, W in _paired_chunks(cu, cw, N, seed, threads):
        Vs = U + W
        for i, F in enumerate(Fs):
            out[i] += np.sum(np.abs(U - Vs @ F.T) ** 2)
    return wt * out / N


def oracle_scale(Ku: Cov, Kw: Cov, F: Optional[np.ndarray] = None) -> float:
    """``sqrt(max diag C_r * max diag C_v^{-1})`` (kernel view), ``C_r = (I - F) K_u``.

    Entries of the oracle estimate fluctuate like ``scale / sqrt(N)``.
    """
    A, B = _mat(Ku), _mat(Kw)
    V = A + B
    if F is None:
        F = sla.solve(V, A.conj().T, assume_a="her").conj().T
    Cr = A - F @ A
    Vinv = np.linalg.inv(V)
    return float(np.sqrt(np.max(np.real(np.diag(Cr))) * np.max(np.real(np.diag(Vinv)))))


def lmmse_oracle(Ku: Cov, Kw: Cov, N: int, seed: int, grid: Optional[Grid] = None,
                 threads: Optional[int] = None) -> FilterSolution:
    """Brute-force estimate from ``N`` simulated pairs.

    Draws ``u`` (stream 0) and ``w`` (stream 1), forms ``v = u + w`` and solves
    ``F C_v = C_uv`` for the empirical covariances with an independent
    Gaussian elimination routine.
    """
    cu, cw, g = _covariance_pair(Ku, Kw, grid)
    n = g.size
    Cv = np.zeros((n, n), dtype=complex)
    Cuv = np.zeros((n, n), dtype=complex)
    for U, W in _paired_chunks(cu, cw, N, seed, threads):
        Vs = U + W
        Cv += _herk(Vs)
        Cuv += U.T @ Vs.conj()
    Cv /= N
    Cuv /= N
    # F Cv = Cuv  <=>  Cv^H F^H = Cuv^H
    F = np.asarray(_backend.gauss_solve(Cv.conj().T, Cuv.conj().T)).conj().T
    return FilterSolution(F, "oracle", residual(F, cu.matrix, cw.matrix), grid=g,
                          diagnostics={"N": int(N), "seed": int(seed)})
