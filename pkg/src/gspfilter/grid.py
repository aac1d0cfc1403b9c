"""Periodic grids on R and R^2 with matched position and frequency lattices.

Positions are ``x_j = -L + j*h`` with ``h = 2L/n`` and frequencies are
``xi_k = (pi/L) * (k - n/2)`` for ``k = 0..n-1``, so that ``h * dxi = 2*pi/n``.
The Fourier transform is the Riemann sum

    F(xi_k) = (2*pi)^(-d/2) h^d sum_j f(x_j) exp(-i <x_j, xi_k>)

and its inverse uses the weight ``dxi^d``.  With these weights the discrete
Parseval identity is exact, so every identity below holds to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "GridAlignmentError",
    "fourier",
    "inverse_fourier",
    "convolve",
    "translate",
    "modulate",
    "inner",
    "norm",
    "boundary_mass",
    "check_boundary",
]

_ALIGN_TOL = 1e-9


class GridAlignmentError(ValueError):
    """Raised when a shift or frequency is not a multiple of the grid step."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L, L)^dim.

    Parameters
    ----------
    n : int
        Points per axis, must be even and positive.
    L : float
        Half-width of the torus.
    dim : int
        1 for signals, 2 for phase-space symbols or functions on R^2.
    """

    n: int
    L: float
    dim: int = 1

    def __post_init__(self):
        if int(self.n) != self.n or self.n <= 0 or self.n % 2:
            raise ValueError(f"n must be a positive even integer, got {self.n!r}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"L must be positive, got {self.L!r}")
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        """Position step ``2L/n``."""
        return 2.0 * self.L / self.n

    @property
    def dxi(self) -> float:
        """Frequency step ``pi/L``."""
        return np.pi / self.L

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def x(self) -> np.ndarray:
        """Position nodes along one axis."""
        return -self.L + self.h * np.arange(self.n)

    @property
    def xi(self) -> np.ndarray:
        """Signed frequency nodes along one axis, ascending."""
        return self.dxi * (np.arange(self.n) - self.n // 2)

    def nodes(self, domain: str = "x") -> tuple:
        """Coordinate arrays (meshgrid, ``ij`` indexing) for the chosen domain."""
        axis = self.x if domain == "x" else self.xi
        if self.dim == 1:
            return (axis,)
        return tuple(np.meshgrid(axis, axis, indexing="ij"))

    def weight(self, domain: str = "x") -> float:
        """Quadrature weight ``h^d`` or ``dxi^d``."""
        return (self.h if domain == "x" else self.dxi) ** self.dim

    def zeros(self, domain: str = "x") -> "GridFunction":
        return GridFunction(np.zeros(self.shape, dtype=complex), self, domain)

    def function(self, fn, domain: str = "x") -> "GridFunction":
        """Sample a callable on the nodes of ``domain``."""
        return GridFunction(np.asarray(fn(*self.nodes(domain)), dtype=complex), self, domain)

    def delta(self, index=None) -> "GridFunction":
        """Discrete delta ``1/h^d`` at a node (default: the origin ``x = 0``)."""
        f = self.zeros()
        if index is None:
            index = (self.n // 2,) * self.dim
        f.values[index] = 1.0 / self.weight("x")
        return f


class GridFunction:
    """Complex samples on a :class:`Grid`.

    ``domain`` is ``'x'`` for position-space samples and ``'xi'`` for
    samples on the frequency nodes (outputs of :func:`fourier`).
    """

    __slots__ = ("values", "grid", "domain")

    def __init__(self, values, grid: Grid, domain: str = "x"):
        if domain not in ("x", "xi"):
            raise ValueError("domain must be 'x' or 'xi'")
        arr = np.asarray(values, dtype=complex)
        if arr.size != grid.size:
            raise ValueError(f"expected {grid.size} values for {grid}, got {arr.size}")
        self.values = arr.reshape(grid.shape)
        self.grid = grid
        self.domain = domain

    def copy(self) -> "GridFunction":
        return GridFunction(self.values.copy(), self.grid, self.domain)

    def _like(self, values) -> "GridFunction":
        return GridFunction(values, self.grid, self.domain)

    def _check(self, other: "GridFunction"):
        if other.grid != self.grid or other.domain != self.domain:
            raise ValueError("grid functions live on different grids or domains")

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return self._like(self.values + other.values)
        return self._like(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return self._like(self.values - other.values)
        return self._like(self.values - other)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return self._like(self.values * other.values)
        return self._like(self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return self._like(-self.values)

    def conj(self) -> "GridFunction":
        return self._like(self.values.conj())

    def __repr__(self):
        return f"GridFunction(n={self.grid.n}, L={self.grid.L}, dim={self.grid.dim}, domain={self.domain!r})"


Values = Union[GridFunction, np.ndarray]


def _signs(grid: Grid):
    n = grid.n
    j = np.arange(n)
    sx = np.where(j % 2, -1.0, 1.0)
    sk = np.where((j - n // 2) % 2, -1.0, 1.0)
    if grid.dim == 1:
        return sx, sk
    return np.multiply.outer(sx, sx), np.multiply.outer(sk, sk)


def fourier(f: GridFunction) -> GridFunction:
    """Discrete Fourier transform on the frequency nodes.

    Computed with the FFT; equal to the defining Riemann sum up to rounding.
    """
    if f.domain != "x":
        raise ValueError("fourier expects a position-space function")
    g = f.grid
    sx, sk = _signs(g)
    c = (2 * np.pi) ** (-g.dim / 2) * g.weight("x")
    out = c * sk * np.fft.fftn(sx * f.values)
    return GridFunction(out, g, "xi")


def inverse_fourier(F: GridFunction) -> GridFunction:
    """Inverse of :func:`fourier` (Riemann sum with weight ``dxi^d``)."""
    if F.domain != "xi":
        raise ValueError("inverse_fourier expects a frequency-space function")
    g = F.grid
    sx, sk = _signs(g)
    c = (2 * np.pi) ** (-g.dim / 2) * g.weight("xi") * g.size
    out = c * sx * np.fft.ifftn(sk * F.values)
    return GridFunction(out, g, "x")


def convolve(f: GridFunction, g: GridFunction) -> GridFunction:
    """Circular convolution ``(f*g)(x_j) = h^d sum_m f(x_m) g(x_j - x_m)``."""
    f._check(g)
    if f.domain != "x":
        raise ValueError("convolve expects position-space functions")
    gr = f.grid
    F, G = fourier(f), fourier(g)
    return inverse_fourier(GridFunction((2 * np.pi) ** (gr.dim / 2) * F.values * G.values, gr, "xi"))


def _steps(shift, step: float, dim: int) -> tuple:
    s = np.atleast_1d(np.asarray(shift, dtype=float))
    if s.size == 1 and dim == 2:
        s = np.repeat(s, 2)
    if s.size != dim:
        raise ValueError(f"shift must have {dim} component(s)")
    m = s / step
    r = np.rint(m)
    if np.any(np.abs(m - r) > _ALIGN_TOL * np.maximum(1.0, np.abs(m))):
        raise GridAlignmentError(f"shift {shift!r} is not a multiple of the step {step!r}")
    return tuple(int(v) for v in r)


def translate(f: GridFunction, x0) -> GridFunction:
    """Circular translation ``(T_{x0} f)(x) = f(x - x0)``.

    On a frequency-space function the shift is in frequency and must be a
    multiple of ``dxi``.
    """
    g = f.grid
    step = g.h if f.domain == "x" else g.dxi
    m = _steps(x0, step, g.dim)
    return f._like(np.roll(f.values, m, axis=tuple(range(g.dim))))


def modulate(f: GridFunction, xi0) -> GridFunction:
    """Pointwise phase ``exp(i <xi0, x>) f(x)``.

    ``xi0`` must be a multiple of the step dual to ``f.domain``: ``dxi`` for
    position-space functions and ``h`` for frequency-space functions (so that
    ``fourier(translate(f, x0)) == modulate(fourier(f), -x0)``).
    """
    g = f.grid
    step = g.dxi if f.domain == "x" else g.h
    m = _steps(xi0, step, g.dim)
    coords = g.nodes(f.domain)
    phase = sum(mi * step * c for mi, c in zip(m, coords))
    return f._like(f.values * np.exp(1j * phase))


def inner(f: GridFunction, g: GridFunction) -> complex:
    """Inner product ``w * sum f conj(g)``, linear in the first argument."""
    f._check(g)
    return complex(f.grid.weight(f.domain) * np.vdot(g.values, f.values))


def norm(f: GridFunction) -> float:
    """L2 norm with the domain's quadrature weight."""
    return float(np.sqrt(f.grid.weight(f.domain)) * np.linalg.norm(f.values))


def boundary_mass(f: GridFunction, margin: int = 1) -> float:
    """Largest modulus within ``margin`` nodes of the torus edge, relative to max."""
    v = np.abs(f.values)
    peak = v.max()
    if peak == 0:
        return 0.0
    n = f.grid.n
    mask = np.zeros(f.grid.shape, dtype=bool)
    edge = np.r_[0:margin, n - margin : n]
    if f.grid.dim == 1:
        mask[edge] = True
    else:
        mask[edge, :] = True
        mask[:, edge] = True
    return float(v[mask].max() / peak)


def check_boundary(f: GridFunction, tol: float = 1e-12, margin: int = 1) -> bool:
    """True when ``f`` has decayed below ``tol`` (relative) at the torus edge."""
    return boundary_mass(f, margin) < tol
