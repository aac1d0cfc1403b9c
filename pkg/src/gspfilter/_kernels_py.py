"""Pure numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` (same formulas, same pruning rules) and serve
as the fallback when the compiled module is unavailable.

The symbol-matrix product is computed in two stages.  Every pair
``(Omega, Gamma)`` enters only through the integer vectors ``p, q`` and a
scalar weight, so the pairs are first collapsed into an array ``W`` indexed
by ``p mod 2P`` and ``q mod 2Q`` (:func:`w_accumulate`).  The result is then
gathered on the torus as

    out(lambda) = sum_{p, q} W(p, q) V(2 lambda - p, 2 lambda' - q) exp(i a^2 (l3 p2 - p1 l4))

with offsets wrapped into one period, either by iterating over the table
entries (:func:`gather_v`) or over the nonzero entries of ``W``
(:func:`gather_w`).  Folding is exact because the phase is periodic in
``p`` with period ``2P`` for the supported lattices.
"""
from __future__ import annotations

import numpy as np

__all__ = ["w_accumulate", "gather_v", "gather_w", "gauss_solve"]


def w_accumulate(W, om, wom, ga, gb, gtab, ptab, poff, tol_abs):
    """``W[p mod 2P, q mod 2Q] += wom[i] gb[j] gtab[|d|^2] ptab[m + poff]`` over all pairs.

    Parameters
    ----------
    W : complex ndarray, shape (2P, 2P, 2Q, 2Q)
    om, ga : int ndarray, shapes (K, 4) and (M, 4)
        Centred lattice indices ``(n1, n2, k1, k2)``.
    wom, gb : complex ndarray
        Coefficients attached to ``om`` and ``ga``.
    gtab : float ndarray
        Gaussian factor by squared index distance; pairs beyond its length
        are truncated.
    ptab : complex ndarray
        ``exp(i a^2 m)`` at position ``m + poff``.
    tol_abs : float
        Pairs with ``|wom gb| gauss <= tol_abs`` are skipped.
    """
    P2, Q2 = W.shape[0], W.shape[2]
    nmax = gtab.shape[0]
    g = ga.astype(np.int64)
    for i in range(om.shape[0]):
        w_o = wom[i]
        if w_o == 0:
            continue
        o = om[i].astype(np.int64)
        d1 = o[0] - o[2] - g[:, 0] - g[:, 2]
        d2 = o[1] - o[3] - g[:, 1] - g[:, 3]
        dd = d1 * d1 + d2 * d2
        sel = dd < nmax
        if not sel.any():
            continue
        gs = g[sel]
        gauss = gtab[dd[sel]]
        w = w_o * gb[sel]
        keep = np.abs(w) * gauss > tol_abs
        if not keep.any():
            continue
        gs, gauss, w = gs[keep], gauss[keep], w[keep]
        p1 = o[0] + o[2] + gs[:, 0] - gs[:, 2]
        p2 = o[1] + o[3] + gs[:, 1] - gs[:, 3]
        q1 = o[0] + o[2] - gs[:, 0] + gs[:, 2]
        q2 = o[1] + o[3] - gs[:, 1] + gs[:, 3]
        u1, u2 = o[2] + gs[:, 2], o[3] + gs[:, 3]
        v1, v2 = o[0] + gs[:, 0], o[1] + gs[:, 1]
        m = v1 * u2 - u1 * v2
        np.add.at(W, (p1 % P2, p2 % P2, q1 % Q2, q2 % Q2), w * gauss * ptab[m + poff])
    return W


def _lambda_grid(P, Q):
    hp, hq = P // 2, Q // 2
    L = np.meshgrid(np.arange(-hp, P - hp), np.arange(-hp, P - hp),
                    np.arange(-hq, Q - hq), np.arange(-hq, Q - hq), indexing="ij")
    return [c.ravel().astype(np.int64) for c in L]


def gather_v(out, W, hlist, vvals, P, Q, ptab, poff):
    """``out += sum_k vvals[k] W((2 lambda - h_k) mod period) phase`` in C order over ``Theta``."""
    l1, l2, l3, l4 = _lambda_grid(P, Q)
    P2, Q2 = 2 * P, 2 * Q
    acc = np.zeros(out.shape, dtype=complex)
    for k in range(hlist.shape[0]):
        h = hlist[k]
        p1, p2 = (2 * l1 - h[0]) % P2, (2 * l2 - h[1]) % P2
        q1, q2 = (2 * l3 - h[2]) % Q2, (2 * l4 - h[3]) % Q2
        acc += vvals[k] * W[p1, p2, q1, q2] * ptab[l3 * p2 - p1 * l4 + poff]
    out += acc
    return out


def gather_w(out, wlist, wvals, vtab, P, Q, ptab, poff):
    """``out += sum_k wvals[k] V((2 lambda - (p_k, q_k)) wrapped) phase``; ``p_k`` in ``[0, 2P)``."""
    l1, l2, l3, l4 = _lambda_grid(P, Q)
    P2, Q2 = 2 * P, 2 * Q
    acc = np.zeros(out.shape, dtype=complex)
    for k in range(wlist.shape[0]):
        p1, p2, q1, q2 = (int(v) for v in wlist[k])
        i1, i2 = (2 * l1 - p1 + P) % P2, (2 * l2 - p2 + P) % P2
        i3, i4 = (2 * l3 - q1 + Q) % Q2, (2 * l4 - q2 + Q) % Q2
        acc += wvals[k] * vtab[i1, i2, i3, i4] * ptab[l3 * p2 - p1 * l4 + poff]
    out += acc
    return out


def gauss_solve(A, B):
    """Solve ``A X = B`` by Gaussian elimination with partial pivoting.

    Written independently of LAPACK so that it can serve as an oracle.
    """
    M = np.array(A, dtype=complex, copy=True)
    X = np.array(B, dtype=complex, copy=True)
    vec = X.ndim == 1
    if vec:
        X = X[:, None]
    n = M.shape[0]
    if M.shape != (n, n) or X.shape[0] != n:
        raise ValueError("shape mismatch in gauss_solve")
    for k in range(n):
        piv = k + int(np.argmax(np.abs(M[k:, k])))
        if M[piv, k] == 0:
            raise np.linalg.LinAlgError("singular matrix in gauss_solve")
        if piv != k:
            M[[k, piv]] = M[[piv, k]]
            X[[k, piv]] = X[[piv, k]]
        f = M[k + 1:, k] / M[k, k]
        M[k + 1:, k:] -= np.outer(f, M[k, k:])
        X[k + 1:] -= np.outer(f, X[k])
    for k in range(n - 1, -1, -1):
        X[k] = (X[k] - M[k, k + 1:] @ X[k + 1:]) / M[k, k]
    return X[:, 0] if vec else X
