"""Small dense linear algebra over real symmetric matrices.

Symmetric matrices are plain numpy arrays.  Every operation here reads the
upper triangle and mirrors it, so the stored upper triangle is the source
of truth for symmetry.  The vectorization ``svec`` uses the basis order
``E_11,...,E_kk`` (diagonal) followed by the off-diagonal pairs
``(1,2),(1,3),...,(1,k),(2,3),...,(k-1,k)``, with the off-diagonal
coordinates carrying a factor sqrt(2) so that the trace inner product of
two symmetric matrices equals the dot product of their svec images.  This
ordering is part of the certificate file format and must not change.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import (
    NoConvergence,
    NonTriangularLength,
    OnesNotInSpan,
    ZeroMatrix,
)

SQRT2 = math.sqrt(2.0)

#: default relative threshold for inferring numerical rank
RANK_TOL = 1e-10

#: sweep cap for the Jacobi eigensolver
MAX_SWEEPS = 100


def sym_upper(S):
    """Symmetric copy of ``S`` built from its upper triangle."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("expected a square matrix")
    out = np.triu(S)
    out = out + np.triu(S, 1).T
    return out


def _offdiag_indices(k):
    rows, cols = np.triu_indices(k, 1)
    return rows, cols


def svec(S):
    """Inner-product-preserving vectorization of a symmetric matrix."""
    S = np.asarray(S, dtype=float)
    k = S.shape[0]
    rows, cols = _offdiag_indices(k)
    return np.concatenate([np.diag(S), SQRT2 * S[rows, cols]])


def triangular_dim(d):
    """The k with k(k+1)/2 == d, or raise NonTriangularLength."""
    k = (math.isqrt(8 * d + 1) - 1) // 2
    if k * (k + 1) // 2 != d or d < 1:
        raise NonTriangularLength(f"{d} is not a triangular number")
    return k


def smat(y):
    """Inverse of :func:`svec`; exact round trip on the stored triangle."""
    y = np.asarray(y, dtype=float)
    k = triangular_dim(y.shape[0])
    S = np.zeros((k, k))
    S[np.diag_indices(k)] = y[:k]
    rows, cols = _offdiag_indices(k)
    off = y[k:] / SQRT2
    S[rows, cols] = off
    S[cols, rows] = off
    return S


def eig_sym(S, max_sweeps=MAX_SWEEPS):
    """Eigenvalues (ascending) and orthonormal eigenvectors of symmetric ``S``."""
    w, v, converged = backend.jacobi_eigh(sym_upper(S), max_sweeps)
    if not converged:
        raise NoConvergence(f"Jacobi sweep cap {max_sweeps} reached")
    return w, v


def min_eig(S):
    """Smallest eigenvalue; S is psd iff this is >= 0."""
    w, _ = eig_sym(S)
    return float(w[0])


def project_psd(S):
    """Frobenius-nearest psd matrix: negative eigenvalues clipped to zero."""
    w, v = eig_sym(S)
    w = np.maximum(w, 0.0)
    out = (v * w) @ v.T
    return 0.5 * (out + out.T)


def jacobi_svd(M, max_sweeps=60):
    """One-sided Jacobi SVD: returns (U, sigma descending, V) with M = U diag(sigma) V^T.

    Columns of the working copy are orthogonalized by the same plane
    rotations the symmetric Jacobi kernel would apply to the Gram matrix.
    Only the economy part is returned (min(p, q) columns).
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("expected a matrix")
    p, q = M.shape
    transposed = p < q
    W = (M.T if transposed else M).astype(float, copy=True)
    rows, cols = W.shape
    V = np.eye(cols)
    eps = 1e-15
    converged = False
    for _ in range(max_sweeps):
        rotated = False
        for i in range(cols - 1):
            for j in range(i + 1, cols):
                aij = float(W[:, i] @ W[:, j])
                aii = float(W[:, i] @ W[:, i])
                ajj = float(W[:, j] @ W[:, j])
                denom = math.sqrt(aii * ajj)
                if denom == 0.0 or abs(aij) <= eps * denom:
                    continue
                rotated = True
                phi = 0.5 * math.atan2(2.0 * aij, ajj - aii)
                c = math.cos(phi)
                s = math.sin(phi)
                wi = W[:, i].copy()
                wj = W[:, j].copy()
                W[:, i] = c * wi - s * wj
                W[:, j] = s * wi + c * wj
                vi = V[:, i].copy()
                vj = V[:, j].copy()
                V[:, i] = c * vi - s * vj
                V[:, j] = s * vi + c * vj
        if not rotated:
            converged = True
            break
    if not converged:
        raise NoConvergence(f"one-sided Jacobi sweep cap {max_sweeps} reached")
    sigma = np.sqrt(np.sum(W * W, axis=0))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    W = W[:, order]
    V = V[:, order]
    U = np.where(sigma > 0.0, W / np.where(sigma > 0.0, sigma, 1.0), 0.0)
    if transposed:
        return V, sigma, U
    return U, sigma, V


@dataclass
class RankFactorization:
    """M = U V with inner dimension r equal to the inferred rank."""

    U: np.ndarray
    V: np.ndarray
    r: int
    residual: float


def _complete_basis(c):
    """Invertible r x r matrix whose first column is c (Gram-Schmidt completion)."""
    r = c.shape[0]
    cols = [c / np.linalg.norm(c)]
    for i in range(r):
        v = np.zeros(r)
        v[i] = 1.0
        for u in cols:
            v = v - (u @ v) * u
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            cols.append(v / norm)
        if len(cols) == r:
            break
    T = np.column_stack(cols)
    T[:, 0] = c
    return T


def rank_factor(M, tol=RANK_TOL, ones_first=False, ones_tol=1e-8):
    """Rank factorization M = U V with r = #(singular values > tol * sigma_max).

    With ``ones_first=True`` a change of basis is applied after the
    factorization so that the first column of U is exactly the all-ones
    vector; raises OnesNotInSpan when that vector is not in the column
    span within ``ones_tol``.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    p, q = M.shape
    U_full, sigma, V_full = jacobi_svd(M)
    smax = float(sigma[0]) if sigma.size else 0.0
    if smax == 0.0:
        raise ZeroMatrix("cannot rank-factor the zero matrix")
    r = int(np.sum(sigma > tol * smax))
    U = U_full[:, :r].copy()
    V = (sigma[:r, None] * V_full[:, :r].T).copy()
    if ones_first:
        ones = np.ones(p)
        c = U.T @ ones
        if np.max(np.abs(U @ c - ones)) > ones_tol * max(1.0, math.sqrt(p)):
            raise OnesNotInSpan("all-ones vector not in column span; scale rows first")
        T = _complete_basis(c)
        U = U @ T
        V = np.linalg.solve(T, V)
        U[:, 0] = 1.0
    residual = float(np.max(np.abs(M - U @ V)))
    return RankFactorization(U=U, V=V, r=r, residual=residual)


def matrix_rank(M, tol=RANK_TOL):
    """Numerical rank via the one-sided Jacobi singular values."""
    M = np.asarray(M, dtype=float)
    if not np.any(M):
        return 0
    _, sigma, _ = jacobi_svd(M)
    smax = float(sigma[0]) if sigma.size else 0.0
    if smax == 0.0:
        return 0
    return int(np.sum(sigma > tol * smax))
