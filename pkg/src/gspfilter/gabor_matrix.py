"""Gabor-coefficient form of Weyl symbol composition.

For symbols expanded in a Gaussian Gabor frame, ``a = sum g_a(Lambda) Pi(Lambda) Phi``,
the symbol ``a`` of the product ``a_u^w b^w`` has coefficients

    g_a(Lambda) = sum_Omega M(g_b)(Lambda, Omega) g_{a_u}(Omega),
    M(g_b)(Lambda, Omega) = sum_Gamma calM(Omega, Gamma, Lambda) g_b(Gamma),

where ``calM`` is an explicit kernel built from the symplectic STFT
``V(X, Y) = (2 pi)^{-1} (Phi, Pi(X, Y) Phi_dual)``.  Lattice points are
handled as centred integer 4-vectors ``(n1, n2, k1, k2)``; the formulas need
``a = b`` and a half-lattice aligned grid so that all phases are ``a^2`` times
integers and every ``V`` argument is a grid node.

On the discrete torus ``V`` is periodic, so offsets are wrapped into one
period.  A modulation index ``-Q/2`` samples both frequencies ``+-Q/2``; such
coefficients are split evenly between the two images before the sum.  The
remaining gap to the grid operator product is aliasing of atom tails across
the torus, about ``1e-5`` relative on the default 64-point grid and at
rounding level on the 256-point grid with the same lattice.

The full matrix has ``|Theta|^2`` entries, so only selected columns or
matrix-vector products are formed.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .gabor import GaborCoefficients, GaborSystem, analyze, dual_window, symplectic_shift, synthesize_at
from .grid import GridAlignmentError
from .io import fmt
from .weyl import WeylSymbol, symbol_from_operator, weyl_quantize

__all__ = [
    "MatrixM",
    "DecayReport",
    "CompositionReport",
    "symplectic_stft",
    "stft_table",
    "StftTable",
    "calM",
    "build_M",
    "m_matvec",
    "verify_composition",
    "decay_fit",
    "default_radius",
    "symbol_coefficients",
    "coefficient_symbol",
    "rough_coefficients",
]

_CONST = 2 * np.pi * np.sqrt(np.pi)


def _check(sys: GaborSystem) -> None:
    if not np.isclose(sys.a, sys.b, rtol=1e-12, atol=0):
        raise GridAlignmentError("the symbol matrix needs a = b")
    if not sys.half_lattice_aligned:
        raise GridAlignmentError("half-lattice points are not grid aligned")
    if sys.P % 2 or sys.Q % 2:
        raise GridAlignmentError("lattice sizes must be even")
    # the gather phase exp(i a^2 (l3 p2 - p1 l4)) must be periodic in p with period 2P
    turns = sys.a * sys.b * 2 * sys.P / (2 * np.pi)
    if abs(turns - round(turns)) > 1e-9:
        raise GridAlignmentError("lattice phase is not periodic on the torus")


def _dual(sys: GaborSystem) -> np.ndarray:
    if sys.dual is None:
        dual_window(sys)
    return sys.dual


def default_radius(tail: float = 1e-12) -> float:
    """Radius at which the Gaussian factor ``exp(-|D|^2 / 4)`` drops to ``tail``."""
    return float(2.0 * np.sqrt(-np.log(tail)))


def symplectic_stft(sys: GaborSystem, X, Y) -> complex:
    """``V(X, Y) = (2 pi)^{-1} (Phi, Pi(X, Y) Phi_dual)`` by direct quadrature."""
    g = sys.grid2
    shifted = symplectic_shift(_dual(sys), X, Y, g)
    return complex(g.weight("x") * np.sum(sys.window * np.conj(shifted)) / (2 * np.pi))


@dataclass
class StftTable:
    """``V`` on the half lattice.

    ``values[hx1 + P, hx2 + P, hy1 + Q, hy2 + Q] = V(a hx / 2, b hy / 2)`` for
    ``hx`` in ``[-P, P)`` and ``hy`` in ``[-Q, Q)`` (one torus period).
    ``offsets`` and ``entries`` list the nonzero entries.
    """

    values: np.ndarray
    offsets: np.ndarray
    entries: np.ndarray


def stft_table(sys: GaborSystem) -> StftTable:
    """Tabulate ``V`` on the half lattice with one FFT per position offset."""
    _check(sys)
    g = sys.grid2
    n, P, Q = g.n, sys.P, sys.Q
    half_s, half_m = sys.shift_steps // 2, sys.mod_steps // 2
    dual = np.conj(_dual(sys))
    hy = np.arange(-Q, Q)
    m1 = (half_m * hy[None, :] + 0 * hy[:, None]) % n
    m2 = (-half_m * hy[:, None] + 0 * hy[None, :]) % n
    sign = np.where((half_m * (hy[None, :] - hy[:, None])) % 2, -1.0, 1.0)
    scale = g.weight("x") / (2 * np.pi)
    vtab = np.empty((2 * P, 2 * P, 2 * Q, 2 * Q), dtype=complex)
    for i, hx1 in enumerate(range(-P, P)):
        for j, hx2 in enumerate(range(-P, P)):
            G = np.fft.fft2(sys.window * np.roll(dual, (hx1 * half_s, hx2 * half_s), axis=(0, 1)))
            vtab[i, j] = scale * sign * G[m1, m2]
    nz = np.nonzero(vtab)
    offsets = np.stack([nz[0] - P, nz[1] - P, nz[2] - Q, nz[3] - Q], axis=1).astype(np.int_)
    return StftTable(vtab, np.ascontiguousarray(offsets), np.ascontiguousarray(vtab[nz]))


def calM(sys: GaborSystem, Omega, Gamma, Lambda) -> complex:
    """Kernel entry ``calM(Omega, Gamma, Lambda)`` for integer lattice indices.

    Evaluated from the closed form with ``V`` computed by direct quadrature,
    independently of the tabulated path used by :func:`build_M`.
    """
    _check(sys)
    a = sys.a
    o, gm, lam = (np.asarray(v, dtype=int) for v in (Omega, Gamma, Lambda))
    p = o[:2] + o[2:] + gm[:2] - gm[2:]
    q = o[:2] + o[2:] - gm[:2] + gm[2:]
    d = o[:2] - o[2:] - gm[:2] - gm[2:]
    u = o[2:] + gm[2:]
    v = o[:2] + gm[:2]
    phase = a * a * (lam[2] * p[1] - p[0] * lam[3] + v[0] * u[1] - u[0] * v[1])
    gauss = np.exp(-a * a * float(d @ d) / 4)
    X = a * (lam[:2] - p / 2)
    Y = a * (lam[2:] - q / 2)
    return complex(_CONST * np.exp(1j * phase) * gauss * symplectic_stft(sys, X, Y))


@dataclass
class MatrixM:
    """Selected columns of ``M(g_b)``.

    Attributes
    ----------
    columns : int ndarray, shape (K, 4)
        Lattice indices ``Omega`` of the stored columns.
    values : complex ndarray, shape (K, |Theta|)
        ``values[i]`` is column ``columns[i]`` in C order over ``Theta``.
    R : float
        Truncation radius of the Gaussian argument.
    tail_bound : float
        Bound on the Gaussian factor beyond ``R``.
    """

    columns: np.ndarray
    values: np.ndarray
    system: GaborSystem = field(repr=False)
    R: float
    tail_bound: float

    def column(self, Omega) -> np.ndarray:
        hit = np.nonzero((self.columns == np.asarray(Omega)).all(axis=1))[0]
        if hit.size == 0:
            raise KeyError(f"column {tuple(Omega)} was not assembled")
        return self.values[hit[0]]

    def to_csv(self, path, threshold: float = 0.0) -> None:
        """Triplets ``(Lambda flat index, Omega flat index, |entry|)``."""
        s = self.system
        centre = np.array([s.P // 2, s.P // 2, s.Q // 2, s.Q // 2])
        col_flat = np.ravel_multi_index(tuple((self.columns + centre).T), s.shape)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "omega", "abs"])
            for i, c in enumerate(col_flat):
                mag = np.abs(self.values[i])
                for k in np.nonzero(mag > threshold)[0]:
                    w.writerow([int(k), int(c), fmt(mag[k])])


def _coeff_array(sys: GaborSystem, g) -> np.ndarray:
    if isinstance(g, GaborCoefficients):
        return g.flat
    return np.asarray(g, dtype=complex).reshape(sys.size)


def _split_nyquist(sys: GaborSystem, idx: np.ndarray, w: np.ndarray):
    # a modulation index -Q/2 samples both +-Q/2 on the grid; give each image half the weight
    h = sys.Q // 2
    for axis in (2, 3):
        nyq = idx[:, axis] == -h
        if nyq.any():
            img = idx[nyq].copy()
            img[:, axis] = h
            w = w.copy()
            w[nyq] *= 0.5
            idx = np.concatenate([idx, img])
            w = np.concatenate([w, w[nyq]])
    return np.ascontiguousarray(idx, dtype=np.int_), np.ascontiguousarray(w)


def _support(sys: GaborSystem, coeffs: np.ndarray, rel: float):
    idx = sys.lattice_indices()
    cmax = np.abs(coeffs).max() if coeffs.size else 0.0
    keep = np.abs(coeffs) > rel * cmax if cmax > 0 else np.zeros(coeffs.size, bool)
    return _split_nyquist(sys, idx[keep], coeffs[keep])


def _phase_table(sys: GaborSystem):
    # exp(i a^2 m) for every integer m the kernels can produce
    mmax = 4 * max(sys.P, sys.Q) ** 2 + 1
    m = np.arange(-mmax, mmax + 1)
    return np.exp(1j * sys.a * sys.b * m), mmax


def _apply(sys: GaborSystem, om, wom, ga, gb, table: StftTable, R: float, rel_tol: float) -> np.ndarray:
    """``sum_{Omega, Gamma} wom gb calM(Omega, Gamma, .)`` as a vector over ``Theta``."""
    P, Q = sys.P, sys.Q
    out = np.zeros(sys.size, dtype=complex)
    if wom.size == 0 or gb.size == 0:
        return out
    a2 = sys.a * sys.b
    nmax = int(np.floor((R / sys.a) ** 2)) + 1 if np.isfinite(R) else 4 * (P + Q) ** 2 + 1
    gtab = np.exp(-a2 / 4 * np.arange(nmax))
    ptab, poff = _phase_table(sys)
    tol_abs = rel_tol * np.abs(wom).max() * np.abs(gb).max()
    W = np.zeros((2 * P, 2 * P, 2 * Q, 2 * Q), dtype=complex)
    _backend.w_accumulate(W, om, wom, ga, gb, gtab, ptab, poff, tol_abs)
    nz = np.nonzero(W)
    if nz[0].size <= table.entries.size:
        wlist = np.ascontiguousarray(np.stack(nz, axis=1), dtype=np.int_)
        _backend.gather_w(out, wlist, np.ascontiguousarray(W[nz]), table.values, P, Q, ptab, poff)
    else:
        _backend.gather_v(out, W, table.offsets, table.entries, P, Q, ptab, poff)
    return _CONST * out


def build_M(sys: GaborSystem, g_b, R: Optional[float] = None, columns: Optional[Sequence] = None,
            rel_tol: float = 0.0, table: Optional[StftTable] = None) -> MatrixM:
    """Assemble columns of ``M(g_b)``.

    Parameters
    ----------
    sys : GaborSystem
    g_b : GaborCoefficients or array
    R : float, optional
        Truncation radius for ``|Omega - Omega' - Gamma - Gamma'|``
        (default: Gaussian factor below ``1e-12``).
    columns : sequence of 4-vectors, optional
        Lattice indices ``Omega``; defaults to ``[(0, 0, 0, 0)]``.
    rel_tol : float
        Pairs whose weight falls below ``rel_tol`` times the largest
        coefficient product are skipped.
    """
    _check(sys)
    R = default_radius() if R is None else float(R)
    cols = np.atleast_2d(np.asarray([(0, 0, 0, 0)] if columns is None else columns, dtype=np.int_))
    table = stft_table(sys) if table is None else table
    ga, gb = _support(sys, _coeff_array(sys, g_b), 0.0)
    out = np.zeros((cols.shape[0], sys.size), dtype=complex)
    for i, c in enumerate(cols):
        om, wom = _split_nyquist(sys, c[None, :], np.ones(1, dtype=complex))
        out[i] = _apply(sys, om, wom, ga, gb, table, R, rel_tol)
    tail = float(np.exp(-R * R / 4)) if np.isfinite(R) else 0.0
    return MatrixM(cols, out, sys, R, tail)


def m_matvec(sys: GaborSystem, g_b, g_u, R: Optional[float] = None, rel_tol: float = 0.0,
             table: Optional[StftTable] = None) -> GaborCoefficients:
    """``M(g_b) g_u`` without forming the matrix."""
    _check(sys)
    R = default_radius() if R is None else float(R)
    table = stft_table(sys) if table is None else table
    om, wom = _support(sys, _coeff_array(sys, g_u), 0.0)
    ga, gb = _support(sys, _coeff_array(sys, g_b), 0.0)
    return GaborCoefficients(_apply(sys, om, wom, ga, gb, table, R, rel_tol), sys)


# composition oracle ------------------------------------------------------------

def coefficient_symbol(sys: GaborSystem, g) -> WeylSymbol:
    """Symbol ``sum g(Lambda) Pi(Lambda) Phi`` sampled on the refined symbol grid."""
    grid = sys.symbol_grid()
    z = -grid.L + 0.5 * grid.h * np.arange(2 * grid.n)
    vals = synthesize_at(sys, g, z, grid.xi)
    return WeylSymbol(vals, grid)


def symbol_coefficients(sys: GaborSystem, a: WeylSymbol) -> GaborCoefficients:
    """Dual-window coefficients of a symbol restricted to the Gabor grid."""
    return analyze(sys, a.values[::2, :], window="dual")


@dataclass
class CompositionReport:
    rel_error: float
    abs_error: float
    norm: float
    g_direct: GaborCoefficients = field(repr=False)
    g_matrix: GaborCoefficients = field(repr=False)
    R: float = 0.0

    @property
    def ok(self) -> bool:
        return self.rel_error <= 1e-5


def verify_composition(a_u, b, sys: GaborSystem, R: Optional[float] = None,
                       rel_tol: float = 0.0, table: Optional[StftTable] = None) -> CompositionReport:
    """Compare ``g_a`` from the operator product with ``M(g_b) g_{a_u}``.

    ``a_u`` and ``b`` may be :class:`WeylSymbol` objects on
    ``sys.symbol_grid()`` or :class:`GaborCoefficients` (read as synthesis
    coefficients).
    """
    _check(sys)
    grid = sys.symbol_grid()

    def split(s):
        if isinstance(s, GaborCoefficients):
            return coefficient_symbol(sys, s), s
        if isinstance(s, WeylSymbol):
            if s.grid != grid:
                raise GridAlignmentError("symbol must live on sys.symbol_grid()")
            return s, symbol_coefficients(sys, s)
        raise TypeError("expected WeylSymbol or GaborCoefficients")

    su, gu = split(a_u)
    sb, gb = split(b)
    K = grid.h * weyl_quantize(su) @ weyl_quantize(sb)
    g_direct = symbol_coefficients(sys, symbol_from_operator(K, grid))
    g_matrix = m_matvec(sys, gb, gu, R=R, rel_tol=rel_tol, table=table)
    diff = np.linalg.norm(g_direct.flat - g_matrix.flat)
    nrm = np.linalg.norm(g_direct.flat)
    rel = diff / nrm if nrm > 0 else diff
    return CompositionReport(float(rel), float(diff), float(nrm), g_direct, g_matrix,
                             default_radius() if R is None else float(R))


# off-diagonal decay ------------------------------------------------------------

@dataclass
class DecayReport:
    """Shell profile and power-law fit of ``|M(Lambda, Omega)|`` against ``rho = |Lambda - Omega|``."""

    rho: np.ndarray
    shell_max: np.ndarray
    fit_mask: np.ndarray
    fitted_t: float
    fit_residual: float
    C: float
    t_target: float
    violations: int

    def to_dict(self) -> dict:
        return {
            "shells": [{"rho": float(r), "max": float(m), "fit": bool(f)}
                       for r, m, f in zip(self.rho, self.shell_max, self.fit_mask)],
            "fitted_t": float(self.fitted_t),
            "fit_residual": float(self.fit_residual),
            "C": float(self.C),
            "t_target": float(self.t_target),
            "violations": int(self.violations),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _wrapped_distance2(sys: GaborSystem, cols: np.ndarray) -> np.ndarray:
    # squared torus distance in index units (a = b)
    idx = sys.lattice_indices()
    per = np.array([sys.P, sys.P, sys.Q, sys.Q])
    out = np.empty((cols.shape[0], idx.shape[0]), dtype=np.int64)
    for i, c in enumerate(cols):
        d = (idx - c + per // 2) % per - per // 2
        out[i] = (d * d).sum(axis=1)
    return out


def decay_fit(M: MatrixM, t_target: float = 4.0, floor: float = 1e-14, outer: float = 0.8) -> DecayReport:
    """Shell maxima of the stored columns and a log-log fit.

    Shells are the distinct torus distances ``rho``.  The fit uses shells with
    ``0 < rho <= outer * rho_max`` whose maximum exceeds ``floor`` times the
    global maximum.  ``C`` is the smallest constant with
    ``max <= C <rho>^{-t_target}`` on the first half of those shells;
    ``violations`` counts fitted shells that exceed that bound.
    """
    sys = M.system
    d2 = _wrapped_distance2(sys, M.columns).ravel()
    mag = np.abs(M.values).ravel()
    keys, inv = np.unique(d2, return_inverse=True)
    smax = np.zeros(keys.size)
    np.maximum.at(smax, inv, mag)
    rho = sys.a * np.sqrt(keys.astype(float))
    gmax = smax.max() if smax.size else 0.0
    mask = (rho > 0) & (rho <= outer * rho.max()) & (smax > floor * gmax) if gmax > 0 else np.zeros(keys.size, bool)
    br = np.sqrt(1 + rho**2)
    if mask.sum() >= 2:
        X = np.log(br[mask])
        Yv = np.log(smax[mask])
        slope, icpt = np.polyfit(X, Yv, 1)
        resid = float(np.sqrt(np.mean((Yv - (slope * X + icpt)) ** 2)))
        sel = np.nonzero(mask)[0]
        first = sel[: max(1, sel.size // 2)]
        C = float(np.max(smax[first] * br[first] ** t_target))
        bound = C * br[sel] ** (-t_target)
        viol = int(np.sum(smax[sel] > bound * (1 + 1e-12)))
        t_hat = float(-slope)
    else:
        t_hat, resid, C, viol = float("inf"), 0.0, 0.0, 0
    return DecayReport(rho, smax, mask, t_hat, resid, C, t_target, viol)


def rough_coefficients(sys: GaborSystem, r: float, seed: Optional[int] = None) -> GaborCoefficients:
    """Coefficients ``<Gamma>^{-r/2}`` (optionally with random unit phases)."""
    pts = sys.lattice_points()
    vals = (1 + (pts**2).sum(axis=1)) ** (-r / 4)
    if seed is not None:
        rng = np.random.default_rng(seed)
        vals = vals * np.exp(2j * np.pi * rng.random(vals.size))
    return GaborCoefficients(vals.astype(complex), sys)

