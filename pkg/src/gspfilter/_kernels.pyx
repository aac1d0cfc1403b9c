# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: Gabor symbol-matrix product and Gaussian elimination.

Same semantics as ``_kernels_py``; see that module for parameter docs.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline long _mod(long v, long m) noexcept nogil:
    # offsets stay within a few periods, so repeated add/subtract beats division
    while v < 0:
        v += m
    while v >= m:
        v -= m
    return v


def w_accumulate(double complex[:, :, :, ::1] W, long[:, ::1] om, double complex[::1] wom,
                 long[:, ::1] ga, double complex[::1] gb, double[::1] gtab,
                 double complex[::1] ptab, long poff, double tol_abs):
    cdef Py_ssize_t K = om.shape[0], M = ga.shape[0], nmax = gtab.shape[0]
    cdef long P2 = W.shape[0], Q2 = W.shape[2]
    cdef Py_ssize_t i, j
    cdef long o1, o2, o3, o4, g1, g2, g3, g4, d1, d2, dd, m
    cdef double gauss, tol2 = tol_abs * tol_abs, mag2
    cdef double complex w, wo
    with nogil:
        for i in range(K):
            wo = wom[i]
            if wo.real == 0 and wo.imag == 0:
                continue
            o1 = om[i, 0]; o2 = om[i, 1]; o3 = om[i, 2]; o4 = om[i, 3]
            for j in range(M):
                g1 = ga[j, 0]; g2 = ga[j, 1]; g3 = ga[j, 2]; g4 = ga[j, 3]
                d1 = o1 - o3 - g1 - g3
                d2 = o2 - o4 - g2 - g4
                dd = d1 * d1 + d2 * d2
                if dd >= nmax:
                    continue
                gauss = gtab[dd]
                w = wo * gb[j]
                mag2 = (w.real * w.real + w.imag * w.imag) * gauss * gauss
                if mag2 <= tol2:
                    continue
                m = (o1 + g1) * (o4 + g4) - (o3 + g3) * (o2 + g2)
                W[_mod(o1 + o3 + g1 - g3, P2), _mod(o2 + o4 + g2 - g4, P2),
                  _mod(o1 + o3 - g1 + g3, Q2), _mod(o2 + o4 - g2 + g4, Q2)] += w * gauss * ptab[m + poff]
    return np.asarray(W)


cdef inline void _gather(double complex[::1] out, double complex[::1] tab, double complex w,
                         long s1, long s2, long s3, long s4, long sp1, long sp2,
                         int P, int Q, long P2, long Q2,
                         long[::1] o1, long[::1] o2, long[::1] o3, long[::1] o4,
                         double complex[::1] ptab, long poff) noexcept nogil:
    # one term: out(lambda) += w tab[wrap(2 lambda - shift)] exp(i a^2 (l3 sp2 - sp1 l4))
    cdef int hp = P // 2, hq = Q // 2, a1, a2, a3, a4
    cdef Py_ssize_t flat = 0
    cdef long b1, b12, b123, ph3
    for a1 in range(P):
        o1[a1] = _mod(2 * (a1 - hp) - s1, P2) * (P2 * Q2 * Q2)
    for a2 in range(P):
        o2[a2] = _mod(2 * (a2 - hp) - s2, P2) * (Q2 * Q2)
    for a3 in range(Q):
        o3[a3] = _mod(2 * (a3 - hq) - s3, Q2) * Q2
    for a4 in range(Q):
        o4[a4] = _mod(2 * (a4 - hq) - s4, Q2)
    for a1 in range(P):
        b1 = o1[a1]
        for a2 in range(P):
            b12 = b1 + o2[a2]
            for a3 in range(Q):
                b123 = b12 + o3[a3]
                ph3 = (a3 - hq) * sp2 + poff
                for a4 in range(Q):
                    out[flat] += w * tab[b123 + o4[a4]] * ptab[ph3 - sp1 * (a4 - hq)]
                    flat += 1


def gather_v(double complex[::1] out, W, long[:, ::1] hlist,
             double complex[::1] vvals, int P, int Q, double complex[::1] ptab, long poff):
    cdef double complex[::1] Wf = np.ascontiguousarray(W).reshape(-1)
    cdef Py_ssize_t N = hlist.shape[0], k, a1
    cdef long P2 = 2 * P, Q2 = 2 * Q
    cdef long[::1] o1 = np.empty(P, dtype=np.int_), o2 = np.empty(P, dtype=np.int_)
    cdef long[::1] o3 = np.empty(Q, dtype=np.int_), o4 = np.empty(Q, dtype=np.int_)
    cdef double complex[::1] acc = np.zeros(out.shape[0], dtype=complex)
    with nogil:
        for k in range(N):
            # W index p = 2 lambda - h; the phase uses that same p, so shift the
            # table by h and evaluate the phase with p = wrap(2 lambda - h)
            _gather_v_term(acc, Wf, vvals[k], hlist[k, 0], hlist[k, 1], hlist[k, 2], hlist[k, 3],
                           P, Q, P2, Q2, o1, o2, o3, o4, ptab, poff)
        for a1 in range(out.shape[0]):
            out[a1] += acc[a1]
    return np.asarray(out)


cdef inline void _gather_v_term(double complex[::1] out, double complex[::1] tab, double complex w,
                                long h1, long h2, long h3, long h4, int P, int Q, long P2, long Q2,
                                long[::1] o1, long[::1] o2, long[::1] o3, long[::1] o4,
                                double complex[::1] ptab, long poff) noexcept nogil:
    cdef int hp = P // 2, hq = Q // 2, a1, a2, a3, a4
    cdef Py_ssize_t flat = 0
    cdef long b1, b12, b123, p1, p2
    # o1/o2 hold the wrapped p values; o3/o4 the q offsets
    for a1 in range(P):
        o1[a1] = _mod(2 * (a1 - hp) - h1, P2)
    for a2 in range(P):
        o2[a2] = _mod(2 * (a2 - hp) - h2, P2)
    for a3 in range(Q):
        o3[a3] = _mod(2 * (a3 - hq) - h3, Q2) * Q2
    for a4 in range(Q):
        o4[a4] = _mod(2 * (a4 - hq) - h4, Q2)
    for a1 in range(P):
        p1 = o1[a1]
        b1 = p1 * (P2 * Q2 * Q2)
        for a2 in range(P):
            p2 = o2[a2]
            b12 = b1 + p2 * (Q2 * Q2)
            for a3 in range(Q):
                b123 = b12 + o3[a3]
                for a4 in range(Q):
                    out[flat] += w * tab[b123 + o4[a4]] * ptab[(a3 - hq) * p2 - p1 * (a4 - hq) + poff]
                    flat += 1


def gather_w(double complex[::1] out, long[:, ::1] wlist, double complex[::1] wvals,
             vtab, int P, int Q, double complex[::1] ptab, long poff):
    cdef double complex[::1] Vf = np.ascontiguousarray(vtab).reshape(-1)
    cdef Py_ssize_t N = wlist.shape[0], k, a1
    cdef long P2 = 2 * P, Q2 = 2 * Q
    cdef long[::1] o1 = np.empty(P, dtype=np.int_), o2 = np.empty(P, dtype=np.int_)
    cdef long[::1] o3 = np.empty(Q, dtype=np.int_), o4 = np.empty(Q, dtype=np.int_)
    cdef double complex[::1] acc = np.zeros(out.shape[0], dtype=complex)
    with nogil:
        for k in range(N):
            # table index of 2 lambda - (p, q) wrapped, i.e. shift by (p - P, q - Q)
            _gather(acc, Vf, wvals[k], wlist[k, 0] - P, wlist[k, 1] - P, wlist[k, 2] - Q, wlist[k, 3] - Q,
                    wlist[k, 0], wlist[k, 1], P, Q, P2, Q2, o1, o2, o3, o4, ptab, poff)
        for a1 in range(out.shape[0]):
            out[a1] += acc[a1]
    return np.asarray(out)


def gauss_solve(A, B):
    """Solve ``A X = B`` by Gaussian elimination with partial pivoting."""
    cdef double complex[:, ::1] M = np.array(A, dtype=np.complex128, order="C", copy=True)
    Xa = np.array(B, dtype=np.complex128, order="C", copy=True)
    vec = Xa.ndim == 1
    if vec:
        Xa = np.ascontiguousarray(Xa[:, None])
    cdef double complex[:, ::1] X = Xa
    cdef int n = M.shape[0], m = X.shape[1]
    if M.shape[1] != n or X.shape[0] != n:
        raise ValueError("shape mismatch in gauss_solve")
    cdef int k, piv, r, c
    cdef double best, mag
    cdef double complex f, tmp, piv_val
    cdef bint singular = False
    with nogil:
        for k in range(n):
            piv = k
            best = -1.0
            for r in range(k, n):
                mag = sqrt(M[r, k].real * M[r, k].real + M[r, k].imag * M[r, k].imag)
                if mag > best:
                    best = mag
                    piv = r
            if best == 0.0:
                singular = True
                break
            if piv != k:
                for c in range(n):
                    tmp = M[k, c]; M[k, c] = M[piv, c]; M[piv, c] = tmp
                for c in range(m):
                    tmp = X[k, c]; X[k, c] = X[piv, c]; X[piv, c] = tmp
            piv_val = M[k, k]
            for r in range(k + 1, n):
                f = M[r, k] / piv_val
                if f.real == 0 and f.imag == 0:
                    continue
                for c in range(k, n):
                    M[r, c] = M[r, c] - f * M[k, c]
                for c in range(m):
                    X[r, c] = X[r, c] - f * X[k, c]
        if not singular:
            for k in range(n - 1, -1, -1):
                for r in range(k + 1, n):
                    f = M[k, r]
                    if f.real == 0 and f.imag == 0:
                        continue
                    for c in range(m):
                        X[k, c] = X[k, c] - f * X[r, c]
                for c in range(m):
                    X[k, c] = X[k, c] / M[k, k]
    if singular:
        raise np.linalg.LinAlgError("singular matrix in gauss_solve")
    res = np.asarray(X)
    return res[:, 0].copy() if vec else res
