"""Psd factorizations: verification, numeric search, and calculus.

A psd factorization of a nonnegative p x q matrix M is a pair of stacks of
k x k psd matrices A_1..A_p (row factors) and B_1..B_q (column factors)
with M_ij = <A_i, B_j> (trace inner product).  The search is a numeric
upper-bound oracle: success yields a verified factorization, failure after
all restarts proves nothing.

Search strategy per restart: momentum-extrapolated block-coordinate
projected gradient (the backend ``psd_als`` kernel) from a random Wishart
start, handed to a Levenberg-Marquardt polish on the factored
parametrization A_i = X_i^T X_i once inside the basin; the two phases
alternate for a few rounds.  The polish keeps factors psd by construction.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import backend, symcore
from .errors import (
    DimensionMismatch,
    NonpositiveScalar,
    RankMismatch,
    RowCountMismatch,
    SearchFailed,
)
from .polyform import as_nonneg_matrix, pair_from_matrix, slack_matrix

log = logging.getLogger(__name__)


@dataclass
class PsdFactorization:
    """Row factors A (p,k,k), column factors B (q,k,k), all psd."""

    k: int
    A: np.ndarray
    B: np.ndarray
    residual: float = math.inf

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        for stack in (self.A, self.B):
            if stack.ndim != 3 or stack.shape[1] != self.k or stack.shape[2] != self.k:
                raise DimensionMismatch("factor stacks must have shape (n, k, k)")

    @property
    def p(self):
        return self.A.shape[0]

    @property
    def q(self):
        return self.B.shape[0]

    def reconstruct(self):
        return np.einsum("ikl,jkl->ij", self.A, self.B)


@dataclass
class SearchConfig:
    """Knobs for the factorization search.

    ``tol`` is the absolute residual target; None means 1e-6 * max|M|.
    ``als_handoff`` is the relative residual at which the projected-gradient
    phase hands over to the Levenberg-Marquardt polish.
    """

    restarts: int = 32
    max_iters: int = 1500
    tol: float | None = None
    rng_seed: int = 0
    rounds: int = 3
    als_handoff: float = 3e-4
    polish_iters: int = 60
    stall_window: int = 60
    stall_rtol: float = 1e-4

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1 or self.rounds < 1:
            raise ValueError("counts must be positive")


@dataclass
class VerifyReport:
    max_residual: float
    min_factor_eig: float
    passed: bool


def verify_factorization(M, F, tol=None):
    """Check M_ij = <A_i, B_j> to tol and psd-ness of every factor.

    Default tol is 1e-6 * max|M| (searched factorizations); constructed
    factorizations should be checked at 1e-8.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (F.p, F.q):
        raise DimensionMismatch("matrix shape does not match factor counts")
    if tol is None:
        tol = 1e-6 * max(1e-300, float(np.max(np.abs(M))))
    max_residual = float(np.max(np.abs(F.reconstruct() - M))) if M.size else 0.0
    eigs = []
    for stack in (F.A, F.B):
        if stack.shape[0]:
            w, _, _ = backend.batch_eigh(stack)
            eigs.append(float(np.min(w[:, 0])))
    min_factor_eig = min(eigs) if eigs else 0.0
    return VerifyReport(
        max_residual=max_residual,
        min_factor_eig=min_factor_eig,
        passed=bool(max_residual <= tol and min_factor_eig >= -tol),
    )


def _wishart_stack(rng, n, k):
    X = rng.standard_normal((n, k, k))
    return np.einsum("ikl,iml->ikm", X, X)


def _random_init(rng, M, k):
    A = _wishart_stack(rng, M.shape[0], k)
    B = _wishart_stack(rng, M.shape[1], k)
    P = np.einsum("ikl,jkl->ij", A, B)
    denom = float(np.sum(P * P))
    c = float(np.sum(M * P)) / denom if denom > 0 else 1.0
    if c > 0:
        s = math.sqrt(c)
        A *= s
        B *= s
    return A, B


def _factor_roots(stack):
    # X with stack_i = X_i^T X_i (eigen square root; psd inputs assumed).
    w, v, _ = backend.batch_eigh(stack)
    root = np.sqrt(np.maximum(w, 0.0))
    return (v * root[:, None, :]).transpose(0, 2, 1)


def _lm_polish(M, A, B, iters, target):
    """Levenberg-Marquardt on the factored residuals <X_i^T X_i, Y_j^T Y_j> - M_ij."""
    p, q = M.shape
    k = A.shape[1]
    X = _factor_roots(A)
    Y = _factor_roots(B)

    def resid(X, Y):
        AX = np.einsum("ika,ikb->iab", X, X)
        BY = np.einsum("jka,jkb->jab", Y, Y)
        return np.einsum("iab,jab->ij", AX, BY) - M

    lam = 1e-6
    r = resid(X, Y)
    cost = float(np.sum(r * r))
    n = (p + q) * k * k
    eye = np.eye(n)
    for _ in range(iters):
        AX = np.einsum("ika,ikb->iab", X, X)
        BY = np.einsum("jka,jkb->jab", Y, Y)
        J = np.zeros((p * q, n))
        idx = 0
        for i in range(p):
            G = 2.0 * np.einsum("ab,jbc->jac", X[i], BY)
            J[i * q:(i + 1) * q, idx:idx + k * k] = G.reshape(q, -1)
            idx += k * k
        for j in range(q):
            G = 2.0 * np.einsum("ab,ibc->iac", Y[j], AX)
            J[j::q, idx:idx + k * k] = G.reshape(p, -1)
            idx += k * k
        g = J.T @ r.ravel()
        improved = False
        for _ in range(12):
            try:
                delta = np.linalg.solve(J.T @ J + lam * eye, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            Xn = X + delta[: p * k * k].reshape(p, k, k)
            Yn = Y + delta[p * k * k:].reshape(q, k, k)
            rn = resid(Xn, Yn)
            cn = float(np.sum(rn * rn))
            if cn < cost:
                X, Y, r, cost = Xn, Yn, rn, cn
                lam = max(lam * 0.3, 1e-13)
                improved = True
                break
            lam *= 10.0
        if not improved or float(np.max(np.abs(r))) <= target:
            break
    A = np.einsum("ika,ikb->iab", X, X)
    B = np.einsum("jka,jkb->jab", Y, Y)
    return A, B, float(np.max(np.abs(r)))


def search_factorization(M, k, cfg=None, init=None):
    """Search for a size-k psd factorization of nonnegative M.

    Returns a verified PsdFactorization or None after all restarts; a None
    is never evidence that no factorization exists.  ``init`` may carry an
    (A0, B0) pair tried before the random restarts.
    """
    M = as_nonneg_matrix(M)
    cfg = cfg or SearchConfig()
    target = cfg.tol if cfg.tol is not None else 1e-6 * max(1e-300, float(np.max(M)))
    handoff = max(target, cfg.als_handoff * max(1e-300, float(np.max(M))))
    rng = np.random.default_rng(cfg.rng_seed)
    p, q = M.shape
    starts = []
    if init is not None:
        starts.append((np.asarray(init[0], dtype=float), np.asarray(init[1], dtype=float)))
    for t in range(cfg.restarts):
        starts.append(None)
    for attempt, start in enumerate(starts):
        if start is None:
            A, B = _random_init(rng, M, k)
        else:
            A, B = start
        best = None
        for _ in range(cfg.rounds):
            A, B, res, _, hit = backend.psd_als(
                M, A, B, cfg.max_iters, handoff, cfg.stall_window, cfg.stall_rtol
            )
            A, B, res = _lm_polish(M, A, B, cfg.polish_iters, target / 4.0)
            if res <= target:
                best = (A, B, res)
                break
        if best is not None:
            A, B, res = best
            F = PsdFactorization(k=k, A=A, B=B, residual=res)
            report = verify_factorization(M, F, tol=target)
            if report.passed:
                F.residual = report.max_residual
                log.debug("search hit on attempt %d, residual %.2e", attempt, res)
                return F
    return None


def concat_factorizations(F1, F2):
    """Factorization of [M1 M2] from factorizations of M1 and M2.

    Row factors become diag(A_i, A_i'); column factors are padded into the
    matching diagonal block.  Exact by the block-trace identity, so the
    recorded residual is max(residual(F1), residual(F2)).
    """
    if F1.p != F2.p:
        raise RowCountMismatch("factorizations must share the row count")
    k = F1.k + F2.k
    p = F1.p
    A = np.zeros((p, k, k))
    A[:, : F1.k, : F1.k] = F1.A
    A[:, F1.k:, F1.k:] = F2.A
    B = np.zeros((F1.q + F2.q, k, k))
    B[: F1.q, : F1.k, : F1.k] = F1.B
    B[F1.q:, F1.k:, F1.k:] = F2.B
    return PsdFactorization(k=k, A=A, B=B, residual=max(F1.residual, F2.residual))


def transpose_factorization(F):
    """Swap row and column factors: a factorization of the transposed matrix."""
    return PsdFactorization(k=F.k, A=F.B.copy(), B=F.A.copy(), residual=F.residual)


def scale_factorization(F, r, s):
    """Factorization of diag(r) M diag(s) for strictly positive scalings."""
    r = np.asarray(r, dtype=float).reshape(-1)
    s = np.asarray(s, dtype=float).reshape(-1)
    if r.shape[0] != F.p or s.shape[0] != F.q:
        raise DimensionMismatch("scaling lengths must match factor counts")
    if np.any(r <= 0.0) or np.any(s <= 0.0):
        raise NonpositiveScalar("row and column scalings must be strictly positive")
    A = F.A * r[:, None, None]
    B = F.B * s[:, None, None]
    scale = float(np.max(r)) * float(np.max(s))
    return PsdFactorization(k=F.k, A=A, B=B, residual=F.residual * scale)


def _diagonal_factorization(M):
    """Exact size-q factorization M = M I: A_i = diag(row i), B_j = diag(e_j)."""
    p, q = M.shape
    A = np.zeros((p, q, q))
    for i in range(p):
        A[i] = np.diag(M[i])
    B = np.zeros((q, q, q))
    for j in range(q):
        B[j, j, j] = 1.0
    return PsdFactorization(k=q, A=A, B=B, residual=0.0)


def _low_rank_diag_factorization(M, rank):
    """Exact diagonal factorization of size <= 2 for a rank <= 2 nonnegative M.

    Rank 1: M = a b^T with a, b >= 0.  Rank 2: the columns span a pointed
    2-d cone inside the nonnegative orthant; its two extreme columns are
    nonnegative generators, and the expansion coefficients of every column
    in them are nonnegative, giving M = W H with W, H >= 0 of inner
    dimension 2 and hence 2x2 diagonal psd factors.
    """
    p, q = M.shape
    if rank == 1:
        j_star = int(np.argmax(np.sum(M * M, axis=0)))
        a = M[:, j_star]
        b = (a @ M) / float(a @ a)
        W = a[:, None]
        H = np.maximum(b, 0.0)[None, :]
    else:
        rf = symcore.rank_factor(M)
        V = rf.V
        live = np.nonzero(np.linalg.norm(V, axis=0) > 0.0)[0]
        coords = V[:, live]
        unit = coords / np.linalg.norm(coords, axis=0)
        center = np.mean(unit, axis=1)
        center /= np.linalg.norm(center)
        perp = np.array([-center[1], center[0]])
        ang = np.arctan2(unit.T @ perp, unit.T @ center)
        g1 = coords[:, int(np.argmin(ang))]
        g2 = coords[:, int(np.argmax(ang))]
        G = np.column_stack([g1, g2])
        W = np.maximum(rf.U @ G, 0.0)
        H = np.maximum(np.linalg.solve(G, V), 0.0)
    A = np.zeros((p, W.shape[1], W.shape[1]))
    for i in range(p):
        A[i] = np.diag(W[i])
    B = np.zeros((q, W.shape[1], W.shape[1]))
    for j in range(q):
        B[j] = np.diag(H[:, j])
    return PsdFactorization(k=W.shape[1], A=A, B=B,
                            residual=float(np.max(np.abs(M - W @ H))))


def _chunk_factorization_k4(N, cfg, chunk_index):
    """Size-4 factorization of a rank-3 chunk N (c x m, c <= 6).

    The transposed nested pair of N places its c row points inside an
    m-gon; a size-4 factorization of the points-versus-own-hull slack
    matrix seeds the row factors, after which fitting the column factors
    is a convex subproblem that the same search settles quickly.
    """
    from .polyform import HPolyhedron, convex_hull_2d

    pair = pair_from_matrix(N, rank=3)
    pts = pair.P.vertices
    hull = convex_hull_2d(pts)
    hull_pts = pts[hull]
    # own-hull facets, counterclockwise
    C = []
    d = []
    for t in range(len(hull_pts)):
        a, b = hull_pts[t], hull_pts[(t + 1) % len(hull_pts)]
        e = b - a
        nrm = np.array([e[1], -e[0]])
        nrm /= np.linalg.norm(nrm)
        C.append(nrm)
        d.append(float(nrm @ a))
    own = HPolyhedron(np.array(C), np.array(d))
    S_own = slack_matrix(pair.P, own, tol=1e-8)
    seed_cfg = replace(cfg, tol=None)
    F_own = search_factorization(S_own, 4, seed_cfg)
    init = None
    if F_own is not None:
        rng = np.random.default_rng(cfg.rng_seed + 104729)
        B0 = _wishart_stack(rng, pair.Q.num_inequalities, 4)
        init = (F_own.A, B0)
    Mn = pair.reconstruct()
    F = search_factorization(Mn, 4, cfg, init=init)
    if F is None:
        raise SearchFailed(f"no size-4 factorization found for chunk {chunk_index}")
    # undo the row normalization and reinsert rows/columns stripped by the pair
    F = scale_factorization(F, 1.0 / pair.row_scalings, np.ones(F.q))
    F = _reinsert_zeros(F, pair.zero_rows, pair.zero_cols, N.shape[0], N.shape[1])
    rep = verify_factorization(N, F)
    F.residual = rep.max_residual
    return F


def _reinsert_zeros(F, zero_rows, zero_cols, p_full, q_full):
    A = np.zeros((p_full, F.k, F.k))
    B = np.zeros((q_full, F.k, F.k))
    live_rows = [i for i in range(p_full) if i not in set(zero_rows)]
    live_cols = [j for j in range(q_full) if j not in set(zero_cols)]
    A[live_rows] = F.A
    B[live_cols] = F.B
    return PsdFactorization(k=F.k, A=A, B=B, residual=F.residual)


def rank3_upper_factorize(M, cfg=None, rank_tol=symcore.RANK_TOL):
    """Factorization of a rank-3 nonnegative matrix with size <= 4*ceil(min(p,q)/6).

    The matrix is transposed if needed so the split runs over the smaller
    dimension, cut into column chunks of at most six, and the chunk
    factorizations are concatenated block-diagonally.  Chunks with at most
    four columns take the exact diagonal factorization (size = column
    count <= 4); wider chunks go through the size-4 hexagon-geometry
    search.  Raises SearchFailed with the chunk index if a search chunk
    cannot be factorized (the bound guarantees existence; the search is
    heuristic).
    """
    M = as_nonneg_matrix(M)
    if not np.any(M > 0.0):
        raise RankMismatch("zero matrix has no rank-3 structure to factorize")
    cfg = cfg or SearchConfig()
    rank = symcore.matrix_rank(M, tol=rank_tol)
    if rank > 3:
        raise RankMismatch(f"matrix rank {rank}, expected at most 3")
    p, q = M.shape
    transposed = p < q
    W = M.T.copy() if transposed else M
    rows, cols = W.shape
    live_rows = np.nonzero(np.any(W > 0.0, axis=1))[0]
    live_cols = np.nonzero(np.any(W > 0.0, axis=0))[0]
    zero_rows = tuple(int(i) for i in np.setdiff1d(np.arange(rows), live_rows))
    zero_cols = tuple(int(j) for j in np.setdiff1d(np.arange(cols), live_cols))
    Wl = W[np.ix_(live_rows, live_cols)]
    chunks = [Wl[:, t:t + 6] for t in range(0, Wl.shape[1], 6)]
    F = None
    for ci, chunk in enumerate(chunks):
        if chunk.shape[1] <= 4:
            Fc = _diagonal_factorization(chunk)
        else:
            crank = symcore.matrix_rank(chunk, tol=rank_tol)
            if crank <= 2:
                Fc = _low_rank_diag_factorization(chunk, crank)
            else:
                Fc = transpose_factorization(
                    _chunk_factorization_k4(chunk.T, replace(cfg, rng_seed=cfg.rng_seed + ci), ci)
                )
        F = Fc if F is None else concat_factorizations(F, Fc)
    F = _reinsert_zeros(F, zero_rows, zero_cols, rows, cols)
    if transposed:
        F = transpose_factorization(F)
    report = verify_factorization(M, F, tol=1e-6 * max(1.0, float(np.max(M))))
    F.residual = report.max_residual
    if not report.passed:
        raise SearchFailed(
            f"assembled factorization failed verification (residual {report.max_residual:.2e})"
        )
    return F
