"""Covariance operators and Monte Carlo ensembles of circular Gaussian processes.

A :class:`CovarianceOperator` stores the kernel matrix ``K`` with
``(K phi)(x_j) = h^d sum_k K[j, k] phi(x_k)``; the matrix acting on sample
vectors is therefore ``op = h^d K``.  Samples satisfy ``E[u u^H] = K`` and
``E[u u^T] = 0``, so ``E[(u, phi) conj((u, psi))] = (op psi, phi)``.

Random streams are counter based: realizations are generated in blocks of
:data:`BLOCK` rows and block ``b`` of stream ``s`` draws from
``Philox(key=(seed, s), counter=(0, 0, b, 0))``.  The output is a pure
function of ``(covariance, N, seed, stream)`` whatever the thread count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
from scipy import fft as sfft
from scipy.linalg import blas

from .grid import Grid, GridFunction
from .spectral import SpectralMeasure, autocovariance, power_law

__all__ = [
    "BLOCK",
    "NotPSDError",
    "CovarianceOperator",
    "GspEnsemble",
    "white_noise_cov",
    "derivative_noise_cov",
    "wss_cov",
    "fourier_multiplier_operator",
    "sample",
    "iter_samples",
    "pair",
    "empirical_covariance",
    "empirical_cross_covariance",
    "thread_count",
]

BLOCK = 1024
_HERM_TOL = 1e-12
_PSD_TOL = 1e-10


class NotPSDError(ValueError):
    """Covariance is not positive semidefinite within tolerance."""


def thread_count(threads: Optional[int] = None) -> int:
    """Worker count: explicit value, else ``GSP_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("GSP_THREADS", "").strip()
        threads = int(env) if env else 1
    return max(1, int(threads))


class CovarianceOperator:
    """Hermitian positive semidefinite covariance in kernel view.

    Parameters
    ----------
    matrix : ndarray, shape (n^d, n^d)
        Kernel values ``k(x_j, x_k)``.
    grid : Grid
    wss : bool
        True when the operator is a Fourier multiplier; ``measure`` then
        holds its spectral measure and enables FFT coloring.
    check : bool
        Validate Hermitian symmetry and positivity.
    """

    def __init__(self, matrix, grid: Grid, wss: bool = False, measure: Optional[SpectralMeasure] = None,
                 check: bool = True):
        K = np.asarray(matrix, dtype=complex)
        if K.shape != (grid.size, grid.size):
            raise ValueError(f"expected a {grid.size}x{grid.size} matrix, got {K.shape}")
        self.grid = grid
        self.wss = bool(wss)
        self.measure = measure
        self.psd_checked = False
        self._eig = None
        if check:
            scale = max(np.abs(K).max(), np.finfo(float).tiny)
            asym = np.abs(K - K.conj().T).max()
            if asym > _HERM_TOL * scale:
                raise ValueError(f"covariance is not Hermitian (asymmetry {asym:.3e})")
            K = 0.5 * (K + K.conj().T)
            lam = np.linalg.eigvalsh(K)
            if lam.size and lam[0] < -_PSD_TOL * max(abs(lam[-1]), abs(lam[0])):
                raise NotPSDError(f"covariance has eigenvalue {lam[0]:.3e} below tolerance")
            self.psd_checked = True
        self.matrix = K

    @classmethod
    def from_operator(cls, op, grid: Grid, **kw) -> "CovarianceOperator":
        """Build from the matrix acting on sample vectors (``op = h^d K``)."""
        return cls(np.asarray(op) / grid.weight("x"), grid, **kw)

    @property
    def op(self) -> np.ndarray:
        """Matrix of the operator acting on grid-function values."""
        return self.grid.weight("x") * self.matrix

    def apply(self, phi: GridFunction) -> GridFunction:
        return GridFunction(self.op @ phi.values.ravel(), self.grid)

    def form(self, phi: GridFunction, psi: Optional[GridFunction] = None) -> complex:
        """``(K psi, phi)`` with the grid inner product (``psi`` defaults to ``phi``)."""
        psi = phi if psi is None else psi
        w = self.grid.weight("x")
        return complex(w * np.vdot(phi.values.ravel(), self.op @ psi.values.ravel()))

    def __add__(self, other: "CovarianceOperator") -> "CovarianceOperator":
        if other.grid != self.grid:
            raise ValueError("operators live on different grids")
        wss = self.wss and other.wss
        mu = self.measure + other.measure if wss and self.measure is not None and other.measure is not None else None
        return CovarianceOperator(self.matrix + other.matrix, self.grid, wss=wss, measure=mu)

    def coloring_factor(self) -> np.ndarray:
        """``B`` with ``B B^H = K`` from the clipped eigendecomposition."""
        if self._eig is None:
            lam, V = np.linalg.eigh(self.matrix)
            self._eig = (np.clip(lam, 0.0, None), V)
        lam, V = self._eig
        return V * np.sqrt(lam)

    def __repr__(self):
        return f"CovarianceOperator(n={self.grid.n}, dim={self.grid.dim}, wss={self.wss})"


def _circulant_index(grid: Grid) -> tuple:
    n = grid.n
    j = np.arange(n)
    d1 = (j[:, None] - j[None, :] + n // 2) % n
    if grid.dim == 1:
        return (d1,)
    a = np.repeat(np.repeat(d1, n, axis=0), n, axis=1)
    b = np.tile(d1, (n, n))
    return (a, b)


def _dft_matrix(grid: Grid) -> np.ndarray:
    """Matrix of :func:`grid.fourier` on flattened values."""
    c = (2 * np.pi) ** -0.5 * grid.h
    F1 = c * np.exp(-1j * np.outer(grid.xi, grid.x))
    return F1 if grid.dim == 1 else np.kron(F1, F1)


def fourier_multiplier_operator(grid: Grid, multiplier) -> np.ndarray:
    """Operator matrix of ``phi -> inverse_fourier(m * fourier(phi))``.

    Built by conjugating ``diag(m)`` with explicit DFT matrices.
    """
    m = np.asarray(multiplier, dtype=complex).ravel()
    F = _dft_matrix(grid)
    Finv = F.conj().T * (grid.weight("xi") / grid.weight("x"))
    return Finv @ (m[:, None] * F)


def white_noise_cov(grid: Grid, p: float = 1.0) -> CovarianceOperator:
    """Covariance ``p * Id``: kernel matrix ``(p / h^d) I``."""
    if p <= 0:
        raise ValueError("power must be positive")
    mu = SpectralMeasure(np.full(grid.shape, p * grid.weight("xi")), grid)
    return CovarianceOperator(np.eye(grid.size) * (p / grid.weight("x")), grid, wss=True, measure=mu, check=False)


def derivative_noise_cov(grid: Grid, p: float, alpha) -> CovarianceOperator:
    """Covariance ``p D^(2 alpha)`` of the derivative of white noise.

    The multiplier ``p xi^(2 alpha)`` is conjugated by the DFT matrix.
    """
    if p <= 0:
        raise ValueError("power must be positive")
    a = np.atleast_1d(np.asarray(alpha, dtype=int))
    if a.size == 1 and grid.dim == 2:
        a = np.repeat(a, 2)
    m = np.ones(grid.shape)
    for ai, c in zip(a, grid.nodes("xi")):
        m = m * c ** (2 * int(ai))
    op = fourier_multiplier_operator(grid, p * m)
    return CovarianceOperator(op / grid.weight("x"), grid, wss=True, measure=power_law(grid, a, p))


def wss_cov(mu: SpectralMeasure) -> CovarianceOperator:
    """Circulant covariance ``K[j, k] = kappa(x_j - x_k)`` of a WSS process."""
    g = mu.grid
    kappa = autocovariance(mu).values
    K = kappa[_circulant_index(g)]
    return CovarianceOperator(K, g, wss=True, measure=mu, check=False)


class GspEnsemble:
    """``N`` realizations of a zero-mean circular Gaussian process.

    Attributes
    ----------
    samples : ndarray, shape (N, n^d)
    seed : int
    stream : int
    covariance : CovarianceOperator or None
    """

    def __init__(self, samples, grid: Grid, seed: int, covariance=None, stream: int = 0):
        self.samples = samples
        self.grid = grid
        self.seed = seed
        self.stream = stream
        self.covariance = covariance

    @property
    def N(self) -> int:
        return self.samples.shape[0]

    def __add__(self, other: "GspEnsemble") -> "GspEnsemble":
        return GspEnsemble(self.samples + other.samples, self.grid, self.seed, None, self.stream)

    def pair(self, phi: GridFunction) -> np.ndarray:
        return pair(self, phi)

    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)


def _normals(seed: int, stream: int, block: int, rows: int, size: int) -> np.ndarray:
    bitgen = np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, stream & 0xFFFFFFFFFFFFFFFF], counter=[0, 0, block, 0])
    # consecutive draws form (re, im) pairs
    z = np.random.Generator(bitgen).standard_normal((rows, 2 * size)).view(complex)
    z *= np.sqrt(0.5)
    return z


def _color_fft(Z: np.ndarray, grid: Grid, mu: SpectralMeasure) -> np.ndarray:
    d = grid.dim
    j = np.arange(grid.n)
    px = np.where(j % 2, -1.0, 1.0)
    pk = np.where((j - grid.n // 2) % 2, -1.0, 1.0)
    sk = pk if d == 1 else np.multiply.outer(pk, pk)
    # centring signs and the transform normalisation folded into one factor
    amp = np.sqrt(mu.weights / (2 * np.pi) ** d) * sk * grid.size
    Zs = Z.reshape((-1,) + grid.shape) * amp
    U = sfft.ifftn(Zs, axes=tuple(range(1, d + 1)), overwrite_x=True)
    if d == 1:
        U[:, 1::2] *= -1
    else:
        U *= np.multiply.outer(px, px)
    return U.reshape(Z.shape[0], -1)


def _prepare(C: CovarianceOperator):
    if not isinstance(C, CovarianceOperator):
        raise TypeError("sample expects a CovarianceOperator")
    if not C.psd_checked and not C.wss:
        C = CovarianceOperator(C.matrix, C.grid)
    use_fft = C.wss and C.measure is not None
    B = None if use_fft else C.coloring_factor().T.copy()
    return C, use_fft, B


def _fill(out, C, use_fft, B, N, seed, stream, first_block, nblocks, threads):
    size = C.grid.size
    base = first_block * BLOCK

    def work(b):
        lo, hi = b * BLOCK, min(N, (b + 1) * BLOCK)
        Z = _normals(seed, stream, b, hi - lo, size)
        out[lo - base:hi - base] = _color_fft(Z, C.grid, C.measure) if use_fft else Z @ B

    blocks = range(first_block, first_block + nblocks)
    nt = thread_count(threads)
    if nt == 1 or nblocks == 1:
        for b in blocks:
            work(b)
    else:
        with ThreadPoolExecutor(max_workers=nt) as ex:
            list(ex.map(work, blocks))


def sample(C: CovarianceOperator, N: int, seed: int, stream: int = 0, threads: Optional[int] = None) -> GspEnsemble:
    """Draw ``N`` realizations with ``E[u u^H] = C.matrix``.

    Parameters
    ----------
    C : CovarianceOperator
    N : int
        Number of realizations.
    seed : int
        Unsigned 64-bit seed.
    stream : int
        Independent stream index (different streams give uncorrelated
        ensembles for the same seed).
    threads : int, optional
        Worker threads; defaults to ``GSP_THREADS``.  Never changes the result.
    """
    C, use_fft, B = _prepare(C)
    N = int(N)
    out = np.empty((N, C.grid.size), dtype=complex)
    _fill(out, C, use_fft, B, N, seed, stream, 0, (N + BLOCK - 1) // BLOCK, threads)
    return GspEnsemble(out, C.grid, seed, C, stream)


def iter_samples(C: CovarianceOperator, N: int, seed: int, stream: int = 0, chunk_blocks: int = 8,
                 threads: Optional[int] = None):
    """Yield ``(start, samples)`` chunks identical to the rows of :func:`sample`.

    Lets large ensembles be reduced without holding them in memory.
    """
    C, use_fft, B = _prepare(C)
    N = int(N)
    nblocks = (N + BLOCK - 1) // BLOCK
    for b0 in range(0, nblocks, chunk_blocks):
        nb = min(chunk_blocks, nblocks - b0)
        lo, hi = b0 * BLOCK, min(N, (b0 + nb) * BLOCK)
        out = np.empty((hi - lo, C.grid.size), dtype=complex)
        _fill(out, C, use_fft, B, N, seed, stream, b0, nb, threads)
        yield lo, out


def pair(ens: GspEnsemble, phi: GridFunction) -> np.ndarray:
    """Sample-wise pairing ``(u, phi) = h^d sum_j u_j conj(phi_j)``."""
    if phi.grid != ens.grid:
        raise ValueError("test function lives on a different grid")
    return ens.grid.weight("x") * (ens.samples @ phi.values.ravel().conj())


def _herk(A: np.ndarray) -> np.ndarray:
    """``A^T conj(A)`` via a Hermitian rank-k update."""
    C = blas.zherk(1.0, np.asfortranarray(A.T), trans=0, lower=0)
    C = np.triu(C) + np.triu(C, 1).conj().T
    return C


def empirical_covariance(ens: GspEnsemble) -> CovarianceOperator:
    """``(1/N) sum_i u_i u_i^H`` in kernel view."""
    C = _herk(ens.samples) / ens.N
    return CovarianceOperator(C, ens.grid, check=False)


def empirical_cross_covariance(a: GspEnsemble, b: GspEnsemble) -> np.ndarray:
    """``(1/N) sum_i a_i b_i^H`` (kernel view)."""
    if a.N != b.N:
        raise ValueError("ensembles have different sizes")
    return (a.samples.T @ b.samples.conj()) / a.N
