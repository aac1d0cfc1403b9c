"""Gaussian Gabor frames on the phase-space plane R^2.

Functions on R^2 are sampled on a two-dimensional :class:`~gspfilter.grid.Grid`
with step ``h2`` and frequency step ``dxi2 = pi/L2``.  For ``X = (x, xi)`` and
``Y = (y, eta)`` the symplectic form is ``sigma(X, Y) = y xi - x eta`` and

    Pi(X, Y) f(Z) = exp(2i sigma(Y, Z)) f(Z - X),

i.e. a translation by ``X`` followed by a modulation with frequency vector
``(2 eta, -2 y)``.  The lattice ``Theta`` holds the points ``(a n, b k)``
folded onto the torus: ``n`` ranges over ``P = 2 L2 / a`` positions and ``k``
over ``Q = pi / (b h2)`` modulations per axis.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .grid import Grid, GridAlignmentError, GridFunction
from .io import fmt
from .weyl import WeylSymbol

__all__ = [
    "GaborSystem",
    "GaborCoefficients",
    "default_system",
    "symplectic_shift",
    "frame_operator",
    "frame_operator_blocks",
    "dual_window",
    "dual_window_exact",
    "analyze",
    "synthesize",
    "synthesize_at",
    "frame_bounds",
    "gabor_mod_norm",
    "gaussian_window_2d",
]

_TOL = 1e-9


def _as_int(value: float, what: str) -> int:
    r = round(value)
    if abs(value - r) > _TOL * max(1.0, abs(value)):
        raise GridAlignmentError(f"{what} is not an integer multiple ({value!r})")
    return int(r)


def gaussian_window_2d(grid2: Grid, scale: float = 1.0) -> np.ndarray:
    """``scale * 2 sqrt(pi) exp(-|X|^2)`` on the nodes of ``grid2``."""
    X1, X2 = grid2.nodes("x")
    return scale * 2.0 * np.sqrt(np.pi) * np.exp(-(X1**2 + X2**2))


@dataclass
class GaborSystem:
    """Lattice, Gaussian window and (after :func:`dual_window`) dual window.

    Parameters
    ----------
    grid2 : Grid
        Two-dimensional grid.
    a, b : float
        Lattice steps with ``a b < pi``; ``a`` must be a multiple of the
        grid step and ``2b`` a multiple of the frequency step.
    window_scale : float
        Multiplies the Gaussian window (frame bounds scale by its square).
    """

    grid2: Grid
    a: float
    b: float
    window_scale: float = 1.0
    dual: Optional[np.ndarray] = field(default=None, repr=False)
    bounds: Optional[tuple] = None

    def __post_init__(self):
        g = self.grid2
        if g.dim != 2:
            raise ValueError("a Gabor system needs a two-dimensional grid")
        if not (self.a > 0 and self.b > 0):
            raise ValueError("lattice steps must be positive")
        if self.a * self.b >= np.pi:
            raise ValueError(f"lattice too sparse: a*b = {self.a * self.b:.6g} >= pi")
        self.shift_steps = _as_int(self.a / g.h, "a / h2")
        self.mod_steps = _as_int(2 * self.b / g.dxi, "2b / dxi2")
        self.P = _as_int(g.n / self.shift_steps, "n2 h2 / a")
        self.Q = _as_int(g.n / self.mod_steps, "n2 dxi2 / (2b)")
        self.window = gaussian_window_2d(g, self.window_scale)

    # lattice bookkeeping -------------------------------------------------
    @property
    def pos_index(self) -> np.ndarray:
        return np.arange(self.P) - self.P // 2

    @property
    def mod_index(self) -> np.ndarray:
        return np.arange(self.Q) - self.Q // 2

    @property
    def shape(self) -> tuple:
        return (self.P, self.P, self.Q, self.Q)

    @property
    def size(self) -> int:
        return self.P**2 * self.Q**2

    @property
    def redundancy(self) -> float:
        """Lattice density relative to the critical density, ``(pi / (a b))^2``."""
        return (np.pi / (self.a * self.b)) ** 2

    def lattice_indices(self) -> np.ndarray:
        """Integer 4-vectors ``(n1, n2, k1, k2)`` in C order, shape (size, 4)."""
        pi_, mi = self.pos_index, self.mod_index
        g = np.meshgrid(pi_, pi_, mi, mi, indexing="ij")
        return np.stack([c.ravel() for c in g], axis=1)

    def lattice_points(self) -> np.ndarray:
        """Coordinates ``(Lambda, Lambda')`` in R^4, shape (size, 4)."""
        idx = self.lattice_indices().astype(float)
        return np.concatenate([self.a * idx[:, :2], self.b * idx[:, 2:]], axis=1)

    @property
    def half_lattice_aligned(self) -> bool:
        """True when ``a/2`` and ``b/2`` points are grid aligned (needed by the M formula)."""
        return self.shift_steps % 2 == 0 and self.mod_steps % 2 == 0

    def symbol_grid(self) -> Grid:
        """1D signal grid whose refined symbol grid contains this grid.

        The symbol ``x`` nodes (step ``h/2``) are twice as fine as ``grid2``
        and the ``xi`` nodes coincide, so ``symbol.values[::2, :]`` is the
        restriction to ``grid2``.
        """
        g = self.grid2
        n = _as_int(2 * np.pi / g.h**2, "2 pi / h2^2")
        if n % 2:
            raise GridAlignmentError("no matching signal grid for this Gabor grid")
        grid = Grid(n, 0.5 * n * g.h)
        if abs(grid.L - g.L) > _TOL * g.L:
            raise GridAlignmentError("signal grid does not cover the Gabor torus")
        return grid

    def boundary_mass(self) -> float:
        """Window tail at the torus edge relative to its peak."""
        w = np.abs(self.window)
        edge = np.concatenate([w[0], w[-1], w[:, 0], w[:, -1]])
        return float(edge.max() / w.max())


def default_system(n2: int = 64) -> GaborSystem:
    """Grid-aligned system with ``a = b = sqrt(pi/2)`` (so ``ab = pi/2``).

    The grid step is ``h2 = sqrt(2 pi / n2)`` so that position and frequency
    steps coincide; ``a = b = 4 h2 * sqrt(n2/64)`` must then be an even
    multiple of both, which holds for ``n2 = 64`` (``L2 = 32 h2 ~ 10.03``).
    """
    h2 = np.sqrt(2 * np.pi / n2)
    a = np.sqrt(np.pi / 2)
    grid2 = Grid(n2, 0.5 * n2 * h2, dim=2)
    return GaborSystem(grid2, a, a)


@dataclass
class GaborCoefficients:
    """Complex value per lattice point, array shape ``(P, P, Q, Q)``."""

    values: np.ndarray
    system: GaborSystem

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        self.values = v.reshape(self.system.shape)

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def __add__(self, other):
        return GaborCoefficients(self.values + other.values, self.system)

    def __mul__(self, c):
        return GaborCoefficients(self.values * c, self.system)

    __rmul__ = __mul__

    def to_csv(self, path) -> None:
        """Rows ``(n1, n2, k1, k2, Lambda1, Lambda2, Lambda'1, Lambda'2, re, im)``."""
        s = self.system
        idx = s.lattice_indices()
        pts = s.lattice_points()
        v = self.flat
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n1", "n2", "k1", "k2", "L1", "L2", "Lp1", "Lp2", "re", "im"])
            for i in range(v.size):
                w.writerow(list(map(int, idx[i])) + [fmt(c) for c in pts[i]] + [fmt(v[i].real), fmt(v[i].imag)])


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=complex)


def _mod_phase(grid2: Grid, m1: int, m2: int) -> np.ndarray:
    X1, X2 = grid2.nodes("x")
    return np.exp(1j * grid2.dxi * (m1 * X1 + m2 * X2))


def symplectic_shift(f, X, Y, grid2: Optional[Grid] = None):
    """``Pi(X, Y) f`` for grid-aligned ``X`` (multiple of ``h2``) and ``2Y`` (multiple of ``dxi2``)."""
    g = f.grid if isinstance(f, GridFunction) else grid2
    if g is None or g.dim != 2:
        raise ValueError("symplectic_shift needs a function on a 2D grid")
    v = _values(f)
    s1 = _as_int(X[0] / g.h, "X1 / h2")
    s2 = _as_int(X[1] / g.h, "X2 / h2")
    m1 = _as_int(2 * Y[1] / g.dxi, "2 eta / dxi2")
    m2 = _as_int(-2 * Y[0] / g.dxi, "2 y / dxi2")
    out = np.roll(v, (s1, s2), axis=(0, 1)) * _mod_phase(g, m1, m2)
    return GridFunction(out, g) if isinstance(f, GridFunction) else out


def _signs(n: int) -> np.ndarray:
    s = np.where(np.arange(n) % 2, -1.0, 1.0)
    return np.multiply.outer(s, s)


def _freq_slots(sys: GaborSystem):
    """FFT bins and signs of the modulation frequencies ``(2 eta, -2 y)``."""
    k = sys.mod_index
    n = sys.grid2.n
    m1 = sys.mod_steps * k[None, :] + 0 * k[:, None]   # from k2 (eta)
    m2 = -sys.mod_steps * k[:, None] + 0 * k[None, :]  # from k1 (y)
    sign = np.where((m1 + m2) % 2, -1.0, 1.0)
    return m1 % n, m2 % n, sign


def _window_array(sys: GaborSystem, window: str) -> np.ndarray:
    if window == "primal":
        return sys.window
    if window == "dual":
        if sys.dual is None:
            dual_window(sys)
        return sys.dual
    raise ValueError("window must be 'primal' or 'dual'")


def analyze(sys: GaborSystem, f, window: str = "dual") -> GaborCoefficients:
    """Coefficients ``c(Lambda) = (f, Pi(Lambda) psi)`` with ``psi`` the dual (default) or primal window."""
    v = _values(f).reshape(sys.grid2.shape)
    psi = _window_array(sys, window)
    g = sys.grid2
    r1, r2, sign = _freq_slots(sys)
    out = np.empty(sys.shape, dtype=complex)
    w = g.weight("x")
    st = sys.shift_steps
    for i, n1 in enumerate(sys.pos_index):
        for j, n2 in enumerate(sys.pos_index):
            shifted = np.roll(psi, (n1 * st, n2 * st), axis=(0, 1))
            G = np.fft.fft2(v * np.conj(shifted))
            out[i, j] = w * sign * G[r1, r2]
    return GaborCoefficients(out, sys)


def synthesize(sys: GaborSystem, c, window: str = "primal") -> GridFunction:
    """``sum_Lambda c(Lambda) Pi(Lambda) psi`` with ``psi`` the primal (default) or dual window."""
    cv = c.values if isinstance(c, GaborCoefficients) else np.asarray(c, dtype=complex).reshape(sys.shape)
    psi = _window_array(sys, window)
    g = sys.grid2
    n = g.n
    r1, r2, sign = _freq_slots(sys)
    out = np.zeros(g.shape, dtype=complex)
    st = sys.shift_steps
    for i, n1 in enumerate(sys.pos_index):
        for j, n2 in enumerate(sys.pos_index):
            H = np.zeros(g.shape, dtype=complex)
            H[r1, r2] = sign * cv[i, j]
            if not H.any():
                continue
            out += n * n * np.fft.ifft2(H) * np.roll(psi, (n1 * st, n2 * st), axis=(0, 1))
    return GridFunction(out, g)


def synthesize_at(sys: GaborSystem, c, z: np.ndarray, zeta: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Evaluate ``sum c(Lambda) Pi(Lambda) Phi`` at arbitrary nodes with the analytic window.

    ``z`` and ``zeta`` are 1D coordinate axes; the result has shape
    ``(z.size, zeta.size)``.  Translations wrap on the torus of period
    ``2 L2``.  Coefficients with modulus ``<= tol * max`` are skipped.
    """
    cv = c.values if isinstance(c, GaborCoefficients) else np.asarray(c, dtype=complex).reshape(sys.shape)
    period = 2 * sys.grid2.L
    Z1, Z2 = np.meshgrid(z, zeta, indexing="ij")
    out = np.zeros(Z1.shape, dtype=complex)
    cmax = np.abs(cv).max()
    if cmax == 0:
        return out
    for (i, j, k, l) in zip(*np.nonzero(np.abs(cv) > tol * cmax)):
        L1, L2 = sys.a * sys.pos_index[i], sys.a * sys.pos_index[j]
        y, eta = sys.b * sys.mod_index[k], sys.b * sys.mod_index[l]
        d1 = (Z1 - L1 + period / 2) % period - period / 2
        d2 = (Z2 - L2 + period / 2) % period - period / 2
        win = sys.window_scale * 2 * np.sqrt(np.pi) * np.exp(-(d1**2 + d2**2))
        out += cv[i, j, k, l] * np.exp(2j * (eta * Z1 - y * Z2)) * win
    return out


def frame_operator(sys: GaborSystem, f, window: str = "primal") -> GridFunction:
    """``S f = sum (f, Pi(Lambda) Phi) Pi(Lambda) Phi`` (matrix free)."""
    return synthesize(sys, analyze(sys, f, window=window), window=window)


def frame_operator_blocks(sys: GaborSystem, window: Optional[np.ndarray] = None):
    """Exact block decomposition of the frame operator.

    Modulation sums vanish unless ``Z - Z'`` is a multiple of ``Q`` grid
    steps per axis, so ``S`` splits into ``Q^2`` blocks indexed by the
    residue of ``Z`` mod ``Q``.  Returns ``(blocks, points)`` where
    ``blocks[c]`` is the block matrix and ``points[c]`` the flat node
    indices of residue class ``c``.
    """
    g = sys.grid2
    n = g.n
    Q = sys.Q  # coset period in grid steps equals the modulation count
    psi = sys.window if window is None else window
    st = sys.shift_steps
    shifts = np.stack([np.roll(psi, (n1 * st, n2 * st), axis=(0, 1)).ravel()
                       for n1 in sys.pos_index for n2 in sys.pos_index])
    cw = g.weight("x") * sys.Q**2
    r = np.arange(0, n, Q)
    blocks, points = [], []
    for c1 in range(Q):
        for c2 in range(Q):
            idx = ((c1 + r)[:, None] * n + (c2 + r)[None, :]).ravel()
            T = shifts[:, idx]
            blocks.append(cw * (T.conj().T @ T))
            points.append(idx)
    return blocks, points


def dual_window_exact(sys: GaborSystem) -> np.ndarray:
    """Dual window from the block decomposition (direct solves)."""
    blocks, points = frame_operator_blocks(sys)
    phi = sys.window.ravel()
    out = np.zeros(phi.size, dtype=complex)
    for B, idx in zip(blocks, points):
        out[idx] = np.linalg.solve(B, phi[idx])
    return out.reshape(sys.grid2.shape).real


def dual_window(sys: GaborSystem, tol: float = 1e-13, maxiter: int = 500) -> np.ndarray:
    """Solve ``S dual = Phi`` by conjugate gradients and store it on ``sys``.

    The residual ``||S dual - Phi|| / ||Phi||`` is stored in
    ``sys.dual_residual``.
    """
    g = sys.grid2
    N = g.size

    def mv(x):
        return frame_operator(sys, x.reshape(g.shape)).values.real.ravel()

    op = LinearOperator((N, N), matvec=mv, dtype=float)
    phi = sys.window.ravel()
    x, info = cg(op, phi, rtol=tol, atol=0.0, maxiter=maxiter)
    res = np.linalg.norm(mv(x) - phi) / np.linalg.norm(phi)
    if info != 0 and res > 1e-10:
        raise RuntimeError(f"dual window iteration did not converge (residual {res:.3e})")
    sys.dual = x.reshape(g.shape)
    sys.dual_residual = float(res)
    return sys.dual


def frame_bounds(sys: GaborSystem) -> tuple:
    """Optimal frame bounds ``(A, B)``: extreme eigenvalues of ``S``.

    Uses the exact block decomposition, so the values are accurate to
    rounding rather than to an iteration tolerance.
    """
    blocks, _ = frame_operator_blocks(sys)
    lo, hi = np.inf, -np.inf
    for B in blocks:
        ev = np.linalg.eigvalsh(B)
        lo, hi = min(lo, ev[0]), max(hi, ev[-1])
    sys.bounds = (float(lo), float(hi))
    return sys.bounds


def gabor_mod_norm(sys: GaborSystem, f, weight: Optional[Callable] = None, p=2, q=2,
                   window: str = "dual") -> float:
    """Mixed ``l^{p,q}`` norm of weighted Gabor coefficients.

    The inner ``p``-norm runs over lattice positions ``Lambda`` and the outer
    ``q``-norm over modulations ``Lambda'``.  ``weight(L1, L2, Lp1, Lp2)`` is
    evaluated on the lattice coordinates.
    """
    c = np.abs(analyze(sys, f, window=window).values)
    if weight is not None:
        pts = sys.lattice_points().T.reshape((4,) + sys.shape)
        c = c * np.asarray(weight(*pts), dtype=float)
    flat = c.reshape(sys.P * sys.P, sys.Q * sys.Q)
    inner = np.max(flat, axis=0) if np.isinf(p) else np.sum(flat**p, axis=0) ** (1.0 / p)
    return float(np.max(inner) if np.isinf(q) else np.sum(inner**q) ** (1.0 / q))
