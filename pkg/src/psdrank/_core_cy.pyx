# Compiled numeric kernels: cyclic Jacobi eigendecomposition, batch psd
# projection, and the alternating projected-gradient factorization search.
# Semantics match psdrank._core_py; keep the two in sync.

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, sin, fabs

cnp.import_array()

BACKEND = "cython"

cdef double OFF_TOL = 1e-15


cdef int _jacobi(double[:, ::1] a, double[:, ::1] v, int n, int max_sweeps) noexcept nogil:
    cdef int sweep, p, q, i
    cdef int converged = 0
    cdef double apq, phi, c, s, scale, thresh, off, tp, tq
    if n == 1:
        return 1
    scale = 1.0
    for p in range(n):
        for q in range(n):
            if fabs(a[p, q]) > scale:
                scale = fabs(a[p, q])
    thresh = OFF_TOL * scale
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                if fabs(a[p, q]) > off:
                    off = fabs(a[p, q])
        if off <= thresh:
            converged = 1
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if fabs(apq) <= thresh:
                    continue
                phi = 0.5 * atan2(2.0 * apq, a[q, q] - a[p, p])
                c = cos(phi)
                s = sin(phi)
                for i in range(n):
                    tp = a[i, p]
                    tq = a[i, q]
                    a[i, p] = c * tp - s * tq
                    a[i, q] = s * tp + c * tq
                for i in range(n):
                    tp = a[p, i]
                    tq = a[q, i]
                    a[p, i] = c * tp - s * tq
                    a[q, i] = s * tp + c * tq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    tp = v[i, p]
                    tq = v[i, q]
                    v[i, p] = c * tp - s * tq
                    v[i, q] = s * tp + c * tq
    if converged == 0:
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                if fabs(a[p, q]) > off:
                    off = fabs(a[p, q])
        if off <= thresh:
            converged = 1
    return converged


cdef void _set_identity(double[:, ::1] v, int n) noexcept nogil:
    cdef int i, j
    for i in range(n):
        for j in range(n):
            v[i, j] = 1.0 if i == j else 0.0


cdef void _sort_eig_swap(double[:, ::1] v, double[::1] w, int n) noexcept nogil:
    # Selection sort with explicit column swaps (simpler to keep v aligned).
    cdef int i, j, m, r
    cdef double tmp
    for i in range(n - 1):
        m = i
        for j in range(i + 1, n):
            if w[j] < w[m]:
                m = j
        if m != i:
            tmp = w[i]
            w[i] = w[m]
            w[m] = tmp
            for r in range(n):
                tmp = v[r, i]
                v[r, i] = v[r, m]
                v[r, m] = tmp


def jacobi_eigh(a, int max_sweeps=100):
    """Cyclic Jacobi eigendecomposition; returns (w ascending, V columns, converged)."""
    cdef cnp.ndarray[double, ndim=2] work = np.array(a, dtype=np.float64, order="C")
    cdef int n = work.shape[0]
    cdef cnp.ndarray[double, ndim=2] vecs = np.empty((n, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] w = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] av = work
    cdef double[:, ::1] vv = vecs
    cdef double[::1] wv = w
    cdef int converged
    _set_identity(vv, n)
    converged = _jacobi(av, vv, n, max_sweeps)
    cdef int i
    for i in range(n):
        wv[i] = av[i, i]
    _sort_eig_swap(vv, wv, n)
    return w, vecs, bool(converged)


def batch_eigh(stack, int max_sweeps=100):
    """Jacobi eigendecomposition of a stack of symmetric matrices."""
    cdef cnp.ndarray[double, ndim=3] work = np.array(stack, dtype=np.float64, order="C")
    cdef int m = work.shape[0]
    cdef int n = work.shape[1]
    cdef cnp.ndarray[double, ndim=3] vecs = np.empty((m, n, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] w = np.empty((m, n), dtype=np.float64)
    cdef double[:, :, ::1] av = work
    cdef double[:, :, ::1] vv = vecs
    cdef double[:, ::1] wv = w
    cdef int b, i, ok
    cdef int all_ok = 1
    with nogil:
        for b in range(m):
            _set_identity(vv[b], n)
            ok = _jacobi(av[b], vv[b], n, max_sweeps)
            if ok == 0:
                all_ok = 0
            for i in range(n):
                wv[b, i] = av[b, i, i]
            _sort_eig_swap(vv[b], wv[b], n)
    return w, vecs, bool(all_ok)


cdef void _reconstruct_clipped(double[:, ::1] vecs, double[::1] w, int n,
                               double[:, ::1] out) noexcept nogil:
    # out = V max(w,0) V^T, symmetrized by construction.
    cdef int i, j, t
    cdef double acc, wt
    for i in range(n):
        for j in range(i, n):
            acc = 0.0
            for t in range(n):
                wt = w[t]
                if wt > 0.0:
                    acc += vecs[i, t] * wt * vecs[j, t]
            out[i, j] = acc
            out[j, i] = acc


def batch_project_psd(stack, int max_sweeps=100):
    """Project each matrix in the stack onto the psd cone."""
    cdef cnp.ndarray[double, ndim=3] work = np.array(stack, dtype=np.float64, order="C")
    cdef int m = work.shape[0]
    cdef int n = work.shape[1]
    cdef cnp.ndarray[double, ndim=3] out = np.empty((m, n, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] vecs = np.empty((n, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] w = np.empty(n, dtype=np.float64)
    cdef double[:, :, ::1] av = work
    cdef double[:, :, ::1] ov = out
    cdef double[:, ::1] vv = vecs
    cdef double[::1] wv = w
    cdef int b, i
    with nogil:
        for b in range(m):
            _set_identity(vv, n)
            _jacobi(av[b], vv, n, max_sweeps)
            for i in range(n):
                wv[i] = av[b, i, i]
            _reconstruct_clipped(vv, wv, n, ov[b])
    return out


cdef double _gram_lam_max(double[:, :, ::1] F, int m, int k,
                          double[:, ::1] gram, double[:, ::1] gvecs) noexcept nogil:
    # Largest eigenvalue of the trace-inner-product Gram matrix of the stack.
    cdef int i, j, r, c
    cdef double acc, lam
    for i in range(m):
        for j in range(i, m):
            acc = 0.0
            for r in range(k):
                for c in range(k):
                    acc += F[i, r, c] * F[j, r, c]
            gram[i, j] = acc
            gram[j, i] = acc
    _set_identity(gvecs, m)
    _jacobi(gram, gvecs, m, 100)
    lam = gram[0, 0]
    for i in range(1, m):
        if gram[i, i] > lam:
            lam = gram[i, i]
    return lam


cdef void _residual(double[:, ::1] M, double[:, :, ::1] A, double[:, :, ::1] B,
                    int p, int q, int k, double[:, ::1] E) noexcept nogil:
    cdef int i, j, r, c
    cdef double acc
    for i in range(p):
        for j in range(q):
            acc = 0.0
            for r in range(k):
                for c in range(k):
                    acc += A[i, r, c] * B[j, r, c]
            E[i, j] = acc - M[i, j]


def psd_als(M, A, B, int max_iters, double target,
            int stall_window=60, double stall_rtol=1e-4):
    """Alternating projected-gradient psd factorization search (see _core_py)."""
    cdef cnp.ndarray[double, ndim=2] Ma = np.array(M, dtype=np.float64, order="C")
    cdef cnp.ndarray[double, ndim=3] Aa = np.array(A, dtype=np.float64, order="C")
    cdef cnp.ndarray[double, ndim=3] Ba = np.array(B, dtype=np.float64, order="C")
    cdef int p = Ma.shape[0]
    cdef int q = Ma.shape[1]
    cdef int k = Aa.shape[1]
    cdef int side = p if p > q else q
    cdef cnp.ndarray[double, ndim=2] E = np.empty((p, q), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] gram = np.empty((side, side), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] gvecs = np.empty((side, side), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] t = np.empty((k, k), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] tv = np.empty((k, k), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] tw = np.empty(k, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3] Aprev = Aa.copy()
    cdef cnp.ndarray[double, ndim=3] Bprev = Ba.copy()
    cdef cnp.ndarray[double, ndim=3] Ahat = np.empty_like(Aa)
    cdef cnp.ndarray[double, ndim=3] Bhat = np.empty_like(Ba)

    cdef double[:, ::1] Mv = Ma
    cdef double[:, :, ::1] Av = Aa
    cdef double[:, :, ::1] Bv = Ba
    cdef double[:, :, ::1] Apv = Aprev
    cdef double[:, :, ::1] Bpv = Bprev
    cdef double[:, :, ::1] Ahv = Ahat
    cdef double[:, :, ::1] Bhv = Bhat
    cdef double[:, ::1] Ev = E
    cdef double[:, ::1] gramv = gram
    cdef double[:, ::1] gvecsv = gvecs
    cdef double[:, ::1] tvmat = t
    cdef double[:, ::1] tvv = tv
    cdef double[::1] twv = tw

    cdef double best_sq = np.inf
    cdef double low_sq = np.inf
    cdef int since_best = 0
    cdef double res = np.inf
    cdef double lam, step, acc, sq, t_prev, t_cur, w
    cdef int it = 0
    cdef int done = 0
    cdef int hit = 0
    cdef int i, j, r, c, row

    t_prev = 1.0
    with nogil:
        for it in range(1, max_iters + 1):
            t_cur = 0.5 * (1.0 + (1.0 + 4.0 * t_prev * t_prev) ** 0.5)
            w = (t_prev - 1.0) / t_cur
            t_prev = t_cur
            # A half-pass at the extrapolated point
            lam = _gram_lam_max(Bv, q, k, gramv, gvecsv)
            if lam > 0.0:
                step = 1.0 / (2.0 * lam)
                for i in range(p):
                    for r in range(k):
                        for c in range(k):
                            Ahv[i, r, c] = Av[i, r, c] + w * (Av[i, r, c] - Apv[i, r, c])
                            Apv[i, r, c] = Av[i, r, c]
                _residual(Mv, Ahv, Bv, p, q, k, Ev)
                for i in range(p):
                    for r in range(k):
                        for c in range(k):
                            acc = 0.0
                            for j in range(q):
                                acc += Ev[i, j] * Bv[j, r, c]
                            tvmat[r, c] = Ahv[i, r, c] - step * 2.0 * acc
                    _set_identity(tvv, k)
                    _jacobi(tvmat, tvv, k, 100)
                    for r in range(k):
                        twv[r] = tvmat[r, r]
                    _reconstruct_clipped(tvv, twv, k, Av[i])
            # B half-pass at the extrapolated point
            lam = _gram_lam_max(Av, p, k, gramv, gvecsv)
            if lam > 0.0:
                step = 1.0 / (2.0 * lam)
                for j in range(q):
                    for r in range(k):
                        for c in range(k):
                            Bhv[j, r, c] = Bv[j, r, c] + w * (Bv[j, r, c] - Bpv[j, r, c])
                            Bpv[j, r, c] = Bv[j, r, c]
                _residual(Mv, Av, Bhv, p, q, k, Ev)
                for j in range(q):
                    for r in range(k):
                        for c in range(k):
                            acc = 0.0
                            for row in range(p):
                                acc += Ev[row, j] * Av[row, r, c]
                            tvmat[r, c] = Bhv[j, r, c] - step * 2.0 * acc
                    _set_identity(tvv, k)
                    _jacobi(tvmat, tvv, k, 100)
                    for r in range(k):
                        twv[r] = tvmat[r, r]
                    _reconstruct_clipped(tvv, twv, k, Bv[j])
            _residual(Mv, Av, Bv, p, q, k, Ev)
            res = 0.0
            sq = 0.0
            for i in range(p):
                for j in range(q):
                    acc = fabs(Ev[i, j])
                    if acc > res:
                        res = acc
                    sq += Ev[i, j] * Ev[i, j]
            if res <= target:
                hit = 1
                done = 1
            else:
                if sq > 1.5 * low_sq:
                    t_prev = 1.0
                if sq < low_sq:
                    low_sq = sq
                if sq < best_sq * (1.0 - stall_rtol):
                    best_sq = sq
                    since_best = 0
                else:
                    since_best += 1
                    if since_best >= stall_window:
                        done = 1
            if done:
                break
    return Aa, Ba, res, it, bool(hit)
