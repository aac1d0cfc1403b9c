"""Spectral measures on the frequency grid and the Radon-Nikodym Wiener filter.

A measure is stored as a weight per frequency node: density times ``dxi^d``
plus any atom mass snapped to the nearest node.  All sums below are plain
sums over these weights.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .grid import Grid, GridFunction, fourier, inverse_fourier

__all__ = [
    "SpectralMeasure",
    "WienerFilter",
    "ConsistencyError",
    "lebesgue",
    "atom",
    "band",
    "power_law",
    "sobolev",
    "from_density",
    "measure_from_name",
    "measure_from_csv",
    "autocovariance",
    "fl2_norm",
    "rn_filter",
    "wss_mse",
    "StationaryError",
    "stationary_process_error",
]


class ConsistencyError(RuntimeError):
    """Two expressions that must agree differ beyond tolerance."""


@dataclass
class SpectralMeasure:
    """Non-negative weights on the frequency nodes of ``grid``.

    Parameters
    ----------
    weights : array_like
        One non-negative weight per frequency node (shape ``grid.shape``).
    grid : Grid
    s : float
        Temperedness exponent, kept as metadata.
    """

    weights: np.ndarray
    grid: Grid
    s: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} weights, got {w.size}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError("spectral measure weights must be non-negative")
        if self.s < 0:
            raise ValueError("temperedness exponent must be >= 0")
        self.weights = w.reshape(self.grid.shape)

    def __add__(self, other: "SpectralMeasure") -> "SpectralMeasure":
        if other.grid != self.grid:
            raise ValueError("measures live on different grids")
        return SpectralMeasure(self.weights + other.weights, self.grid, max(self.s, other.s))

    def __mul__(self, c: float) -> "SpectralMeasure":
        return SpectralMeasure(c * self.weights, self.grid, self.s)

    __rmul__ = __mul__

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def tempered_mass(self) -> float:
        """``sum weights * <xi>^(-s)``; finite on any grid."""
        return float(np.sum(self.weights * _japanese(self.grid) ** (-self.s)))

    def density(self) -> np.ndarray:
        """Weights divided by the node volume ``dxi^d``."""
        return self.weights / self.grid.weight("xi")


def _xi_abs2(grid: Grid) -> np.ndarray:
    return sum(c**2 for c in grid.nodes("xi"))


def _japanese(grid: Grid) -> np.ndarray:
    return np.sqrt(1.0 + _xi_abs2(grid))


def from_density(grid: Grid, density, s: float = 0.0) -> SpectralMeasure:
    """Measure with a density callable evaluated on the frequency nodes."""
    vals = np.asarray(density(*grid.nodes("xi")), dtype=float)
    return SpectralMeasure(np.broadcast_to(vals, grid.shape) * grid.weight("xi"), grid, s)


def lebesgue(grid: Grid, p: float = 1.0) -> SpectralMeasure:
    """``p`` times Lebesgue measure (spectrum of white noise with power ``p``)."""
    if p < 0:
        raise ValueError("power must be non-negative")
    return SpectralMeasure(np.full(grid.shape, p * grid.weight("xi")), grid)


def atom(grid: Grid, xi, m: float = 1.0) -> SpectralMeasure:
    """Point mass ``m`` snapped to the frequency node nearest to ``xi``."""
    if m < 0:
        raise ValueError("atom mass must be non-negative")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.size == 1 and grid.dim == 2:
        xi = np.repeat(xi, 2)
    idx = tuple(int(np.clip(np.rint(v / grid.dxi) + grid.n // 2, 0, grid.n - 1)) for v in xi)
    w = np.zeros(grid.shape)
    w[idx] = m
    return SpectralMeasure(w, grid)


def band(grid: Grid, lo: float, hi: float, p: float = 1.0) -> SpectralMeasure:
    """Density ``p`` on ``lo <= |xi| <= hi``."""
    r = np.sqrt(_xi_abs2(grid))
    return SpectralMeasure(np.where((r >= lo) & (r <= hi), p, 0.0) * grid.weight("xi"), grid)


def power_law(grid: Grid, alpha, p: float = 1.0) -> SpectralMeasure:
    """``p * xi^(2 alpha) dxi`` for a multi-index ``alpha``."""
    a = np.atleast_1d(np.asarray(alpha, dtype=int))
    if a.size == 1 and grid.dim == 2:
        a = np.repeat(a, 2)
    if np.any(a < 0):
        raise ValueError("alpha must be a non-negative multi-index")
    dens = np.ones(grid.shape)
    for ai, c in zip(a, grid.nodes("xi")):
        dens = dens * c ** (2 * int(ai))
    return SpectralMeasure(p * dens * grid.weight("xi"), grid, s=2.0 * float(a.sum()))


def sobolev(grid: Grid, s: float) -> SpectralMeasure:
    """``<xi>^(2s) dxi`` so that the FL2 norm is the discrete H^s norm."""
    return SpectralMeasure(_japanese(grid) ** (2 * s) * grid.weight("xi"), grid, s=max(0.0, 2.0 * s))


def measure_from_name(grid: Grid, spec: str) -> SpectralMeasure:
    """Build a measure from a textual constructor.

    Accepted forms: ``lebesgue p``, ``atom xi m``, ``band lo hi p``,
    ``power-law alpha p``, ``sobolev s``, ``gaussian amp width`` (density
    ``amp exp(-|xi|^2 / (2 width^2))``) and ``zero``.  Several terms may be
    joined with ``+``.
    """
    total = None
    for term in spec.split("+"):
        parts = term.split()
        if not parts:
            raise ValueError(f"empty measure term in {spec!r}")
        name, args = parts[0].lower(), [float(v) for v in parts[1:]]
        try:
            if name == "lebesgue":
                m = lebesgue(grid, *args)
            elif name == "atom":
                m = atom(grid, *args)
            elif name == "band":
                m = band(grid, *args)
            elif name in ("power-law", "power_law", "powerlaw"):
                m = power_law(grid, int(args[0]), *args[1:])
            elif name == "sobolev":
                m = sobolev(grid, *args)
            elif name == "gaussian":
                amp, width = args
                if width <= 0 or amp < 0:
                    raise ValueError("gaussian density needs amp >= 0 and width > 0")
                m = from_density(grid, lambda *xs: amp * np.exp(-sum(x * x for x in xs) / (2 * width**2)))
            elif name == "zero":
                m = SpectralMeasure(np.zeros(grid.shape), grid)
            else:
                raise ValueError(f"unknown measure constructor {name!r}")
        except TypeError as exc:
            raise ValueError(f"bad arguments for measure {term.strip()!r}") from exc
        total = m if total is None else total + m
    return total


def measure_from_csv(path, grid: Grid) -> SpectralMeasure:
    """Read ``(index or frequency, weight)`` rows; frequencies snap to nodes.

    A header row is optional.  Integer-valued first columns with header
    ``index`` are taken as node indices, anything else as frequencies.
    """
    if grid.dim != 1:
        raise ValueError("CSV measures are supported for one-dimensional grids")
    w = np.zeros(grid.n)
    by_index = False
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            try:
                key, val = float(row[0]), float(row[1])
            except ValueError:
                by_index = row[0].strip().lower() in ("index", "k", "node")
                continue
            if by_index:
                k = int(key)
            else:
                k = int(np.clip(np.rint(key / grid.dxi) + grid.n // 2, 0, grid.n - 1))
            w[k] += val
    return SpectralMeasure(w, grid)


def autocovariance(mu: SpectralMeasure) -> GridFunction:
    """``kappa(x_j) = (2 pi)^(-d) sum_k exp(i x_j xi_k) w_k``."""
    g = mu.grid
    F = GridFunction((2 * np.pi) ** (-g.dim / 2) * mu.weights / g.weight("xi"), g, "xi")
    return inverse_fourier(F)


def fl2_norm(f: GridFunction, mu: SpectralMeasure) -> float:
    """``(sum_k |f^(xi_k)|^2 w_k)^(1/2)``."""
    if f.grid != mu.grid:
        raise ValueError("function and measure live on different grids")
    F = fourier(f) if f.domain == "x" else f
    return float(np.sqrt(np.sum(np.abs(F.values) ** 2 * mu.weights)))


@dataclass
class WienerFilter:
    """Frequency response of the optimal convolution filter.

    Attributes
    ----------
    fhat : ndarray
        Values in ``[0, 1]`` on the frequency nodes.
    support : ndarray of bool
        ``{w_u > tau}``; ``fhat`` vanishes outside it.
    tau : float
        Support tolerance used.
    """

    fhat: np.ndarray
    support: np.ndarray
    grid: Grid
    tau: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(self.fhat < 0) or np.any(self.fhat > 1):
            raise ValueError("filter response must lie in [0, 1]")
        if np.any(self.fhat[~self.support] != 0):
            raise ValueError("filter response must vanish off its support")


def rn_filter(mu_u: SpectralMeasure, mu_w: SpectralMeasure, tau: Optional[float] = None) -> WienerFilter:
    """Radon-Nikodym derivative ``d mu_u / d(mu_u + mu_w)`` on the grid.

    Parameters
    ----------
    mu_u, mu_w : SpectralMeasure
        Signal and noise spectra on the same grid.
    tau : float, optional
        Support tolerance, default ``1e-14 * max(w_u + w_w)``.
    """
    if mu_u.grid != mu_w.grid:
        raise ValueError("measures live on different grids")
    wu, ww = mu_u.weights, mu_w.weights
    tot = wu + ww
    if tau is None:
        tau = 1e-14 * float(tot.max()) if tot.size else 0.0
    if tau < 0:
        raise ValueError("tau must be non-negative")
    support = wu > tau
    fhat = np.zeros_like(wu)
    fhat[support] = wu[support] / tot[support]
    np.clip(fhat, 0.0, 1.0, out=fhat)
    return WienerFilter(fhat, support, mu_u.grid, float(tau))


def wss_mse(filt: WienerFilter, phi: GridFunction, mu_u: SpectralMeasure, mu_w: SpectralMeasure,
            return_both: bool = False):
    """Minimal error ``J(phi)`` of the WSS filter.

    Computes ``sum fhat |phi^|^2 w_w`` and ``sum (1 - fhat) |phi^|^2 w_u`` and
    raises :class:`ConsistencyError` when they differ by more than
    ``1e-10`` times ``sum |phi^|^2 (w_u + w_w)``.
    """
    P = np.abs(fourier(phi).values) ** 2
    j_w = float(np.sum(filt.fhat * P * mu_w.weights))
    j_u = float(np.sum((1.0 - filt.fhat) * P * mu_u.weights))
    scale = float(np.sum(P * (mu_u.weights + mu_w.weights)))
    if abs(j_w - j_u) > 1e-10 * scale + 1e-300:
        raise ConsistencyError(f"error expressions disagree: {j_w!r} vs {j_u!r}")
    return (j_w, j_u) if return_both else j_w


class StationaryError(NamedTuple):
    """Pointwise error of the WSS filter and the split ``J = J1 + J2``."""

    error: float
    J1: float
    J2: float


def stationary_process_error(filt: WienerFilter, mu_u: SpectralMeasure, mu_w: SpectralMeasure) -> StationaryError:
    """Position-independent mean square error ``E|u_o(x) - u(x)|^2``.

    ``J1 = sum (1 - fhat) w_u`` and ``J2 = sum fhat w_w``; the error is
    ``(2 pi)^(-d) J2``, which must equal ``(2 pi)^(-d) J1``.
    """
    d = mu_u.grid.dim
    j1 = float(np.sum((1.0 - filt.fhat) * mu_u.weights))
    j2 = float(np.sum(filt.fhat * mu_w.weights))
    scale = float(np.sum(mu_u.weights + mu_w.weights))
    if abs(j1 - j2) > 1e-10 * scale + 1e-300:
        raise ConsistencyError(f"error expressions disagree: {j1!r} vs {j2!r}")
    return StationaryError((2 * np.pi) ** (-d) * j2, j1, j2)
