"""Pure numpy implementation of the numeric kernels.

This is the fallback backend used when the compiled extension
(:mod:`psdrank._core_cy`) is unavailable.  Both backends expose the same
four entry points and implement the same arithmetic, so results agree to
floating-point reordering:

* ``jacobi_eigh``       cyclic Jacobi eigendecomposition of one symmetric matrix
* ``batch_eigh``        the same, vectorized over a stack of equal-size matrices
* ``batch_project_psd`` nearest-psd projection of a stack (eigenvalue clipping)
* ``psd_als``           block-coordinate projected-gradient psd factorization search
"""

import numpy as np

BACKEND = "python"

_OFF_TOL = 1e-15


def _offdiag_max(a):
    n = a.shape[0]
    if n < 2:
        return 0.0
    mask = ~np.eye(n, dtype=bool)
    return float(np.max(np.abs(a[mask])))


def jacobi_eigh(a, max_sweeps=100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, v, converged)`` with eigenvalues ``w`` ascending and
    eigenvectors in the columns of ``v``.  ``converged`` is False when the
    off-diagonal mass is still above threshold after ``max_sweeps`` sweeps.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a[0].copy(), v, True
    scale = max(1.0, float(np.max(np.abs(a))))
    thresh = _OFF_TOL * scale
    converged = False
    for _ in range(max_sweeps):
        if _offdiag_max(a) <= thresh:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= thresh:
                    continue
                phi = 0.5 * np.arctan2(2.0 * apq, a[q, q] - a[p, p])
                c = np.cos(phi)
                s = np.sin(phi)
                colp = a[:, p].copy()
                colq = a[:, q].copy()
                a[:, p] = c * colp - s * colq
                a[:, q] = s * colp + c * colq
                rowp = a[p, :].copy()
                rowq = a[q, :].copy()
                a[p, :] = c * rowp - s * rowq
                a[q, :] = s * rowp + c * rowq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        converged = _offdiag_max(a) <= thresh
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order], converged


def batch_eigh(stack, max_sweeps=100):
    """Jacobi eigendecomposition of a stack of symmetric matrices.

    All matrices share the rotation schedule; per-matrix angles are applied
    simultaneously, which keeps the loop vectorized over the batch.
    """
    a = np.array(stack, dtype=float)
    m, n, _ = a.shape
    v = np.broadcast_to(np.eye(n), (m, n, n)).copy()
    if n == 1:
        return a[:, 0].copy(), v, True
    scale = np.maximum(1.0, np.max(np.abs(a), axis=(1, 2)))
    thresh = _OFF_TOL * scale
    offmask = ~np.eye(n, dtype=bool)
    converged = False
    for _ in range(max_sweeps):
        off = np.max(np.abs(a[:, offmask]), axis=1)
        if np.all(off <= thresh):
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                active = np.abs(apq) > thresh
                if not np.any(active):
                    continue
                phi = 0.5 * np.arctan2(2.0 * apq, a[:, q, q] - a[:, p, p])
                c = np.where(active, np.cos(phi), 1.0)
                s = np.where(active, np.sin(phi), 0.0)
                cc = c[:, None]
                ss = s[:, None]
                colp = a[:, :, p].copy()
                colq = a[:, :, q].copy()
                a[:, :, p] = cc * colp - ss * colq
                a[:, :, q] = ss * colp + cc * colq
                rowp = a[:, p, :].copy()
                rowq = a[:, q, :].copy()
                a[:, p, :] = cc * rowp - ss * rowq
                a[:, q, :] = ss * rowp + cc * rowq
                a[:, p, q] = np.where(active, 0.0, a[:, p, q])
                a[:, q, p] = a[:, p, q]
                vp = v[:, :, p].copy()
                vq = v[:, :, q].copy()
                v[:, :, p] = cc * vp - ss * vq
                v[:, :, q] = ss * vp + cc * vq
    else:
        off = np.max(np.abs(a[:, offmask]), axis=1)
        converged = bool(np.all(off <= thresh))
    w = np.einsum("mii->mi", a).copy()
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return w, v, converged


def batch_project_psd(stack, max_sweeps=100):
    """Project each matrix in the stack onto the psd cone (Frobenius-nearest)."""
    w, v, _ = batch_eigh(stack, max_sweeps)
    w = np.maximum(w, 0.0)
    out = np.einsum("mij,mj,mkj->mik", v, w, v)
    return 0.5 * (out + np.transpose(out, (0, 2, 1)))


def _pair_gram(stack):
    # Gram matrix of the stack under the trace inner product.
    return np.einsum("ikl,jkl->ij", stack, stack)


def _lam_max(sym):
    w, _, _ = jacobi_eigh(sym)
    return float(w[-1])


def psd_als(M, A, B, max_iters, target, stall_window=60, stall_rtol=1e-4):
    """Alternating projected-gradient search for psd factors of ``M``.

    ``A`` (p,k,k) and ``B`` (q,k,k) are the initial psd factor stacks; they
    are not modified.  Each half-pass takes one gradient step at a
    momentum-extrapolated point (step size from the exact Lipschitz constant
    of the half-problem) followed by projection back onto the psd cone; the
    momentum counter resets whenever the squared error overshoots.  Returns
    ``(A, B, residual, iters, hit_target)`` where ``residual`` is
    ``max|<A_i,B_j> - M_ij|``.
    """
    M = np.asarray(M, dtype=float)
    A = np.array(A, dtype=float)
    B = np.array(B, dtype=float)
    A_prev = A.copy()
    B_prev = B.copy()
    t_prev = 1.0
    best_sq = np.inf
    low_sq = np.inf
    since_best = 0
    res = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        t_cur = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_prev * t_prev))
        w = (t_prev - 1.0) / t_cur
        t_prev = t_cur
        lam = _lam_max(_pair_gram(B))
        if lam > 0.0:
            step = 1.0 / (2.0 * lam)
            A_hat = A + w * (A - A_prev)
            A_prev = A
            E = np.einsum("ikl,jkl->ij", A_hat, B) - M
            grad = 2.0 * np.einsum("ij,jkl->ikl", E, B)
            A = batch_project_psd(A_hat - step * grad)
        lam = _lam_max(_pair_gram(A))
        if lam > 0.0:
            step = 1.0 / (2.0 * lam)
            B_hat = B + w * (B - B_prev)
            B_prev = B
            E = np.einsum("ikl,jkl->ij", A, B_hat) - M
            grad = 2.0 * np.einsum("ij,ikl->jkl", E, A)
            B = batch_project_psd(B_hat - step * grad)
        E = np.einsum("ikl,jkl->ij", A, B) - M
        res = float(np.max(np.abs(E)))
        if res <= target:
            return A, B, res, it, True
        sq = float(np.sum(E * E))
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
                break
    return A, B, res, it, False
