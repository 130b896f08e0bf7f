"""Polytopes, polyhedra, slack matrices, and nested pairs.

Matrices are plain numpy arrays; nonnegative matrices are validated with
:func:`as_nonneg_matrix`.  Polyhedral data carries light dataclasses:
``VPolytope`` (vertex list), ``HPolyhedron`` (inequalities ``c_j^T x <= d_j``)
and ``NestedPair`` (an inner vertex body inside an outer inequality body,
with the row scalings and translation that produced them from a matrix).
"""

from dataclasses import dataclass, field

import numpy as np

from . import symcore
from .errors import (
    DimensionMismatch,
    DomainError,
    NotNested,
    OriginNotInterior,
    RankMismatch,
    ZeroMatrix,
)


def as_nonneg_matrix(M, tol=1e-12):
    """Validate and return a nonnegative float matrix (tiny negatives clipped)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.size == 0:
        raise ValueError("expected a nonempty 2-d matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    scale = max(1.0, float(np.max(np.abs(M))))
    if float(np.min(M)) < -tol * scale:
        raise ValueError("matrix has negative entries")
    return np.maximum(M, 0.0)


@dataclass
class VPolytope:
    """Polytope given by a list of points (rows of ``vertices``).

    ``verified`` records whether redundant (non-extreme) points are known to
    have been removed; slack-matrix plumbing keeps every listed point.
    """

    vertices: np.ndarray
    verified: bool = False

    def __post_init__(self):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if self.vertices.shape[0] < 1:
            raise ValueError("polytope needs at least one vertex")
        v = self.vertices
        for i in range(len(v)):
            for j in range(i + 1, len(v)):
                if np.array_equal(v[i], v[j]):
                    raise ValueError(f"duplicate vertices at {i} and {j}")

    @property
    def n(self):
        return self.vertices.shape[1]

    @property
    def num_vertices(self):
        return self.vertices.shape[0]


@dataclass
class HPolyhedron:
    """Polyhedron {x : C x <= d}, one inequality per row of C."""

    C: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.d = np.asarray(self.d, dtype=float).reshape(-1)
        if self.C.shape[0] != self.d.shape[0]:
            raise DimensionMismatch("C rows and d length differ")
        zero_c = np.all(self.C == 0.0, axis=1)
        if np.any(zero_c & (self.d < 0.0)):
            raise ValueError("inequality with zero normal and negative offset is infeasible")

    @property
    def n(self):
        return self.C.shape[1]

    @property
    def num_inequalities(self):
        return self.C.shape[0]


@dataclass
class NestedPair:
    """P inside Q together with the scalings that produced them from a matrix.

    ``row_scalings`` are the positive multipliers applied to the (stripped)
    source rows; ``translation`` is the shift that centered the pair.
    ``zero_rows``/``zero_cols`` record stripped indices of the original
    matrix so downstream factorizations can reinsert zero factors.
    """

    P: VPolytope
    Q: HPolyhedron
    row_scalings: np.ndarray
    translation: np.ndarray
    zero_rows: tuple = ()
    zero_cols: tuple = ()

    def reconstruct(self):
        """The normalized source matrix: slack_matrix(P, Q)."""
        return slack_matrix(self.P, self.Q)


def slack_matrix(P, Q, tol=1e-10):
    """Generalized slack matrix: entry (i,j) = d_j - c_j^T p_i, clipped at zero.

    Raises NotNested when some vertex violates an inequality beyond ``tol``
    (scaled by the pair's coordinate magnitude).
    """
    if P.n != Q.n:
        raise DimensionMismatch("polytope and polyhedron dimensions differ")
    S = Q.d[None, :] - P.vertices @ Q.C.T
    scale = max(1.0, float(np.max(np.abs(P.vertices))), float(np.max(np.abs(Q.d))))
    if float(np.min(S)) < -tol * scale:
        i, j = np.unravel_index(np.argmin(S), S.shape)
        raise NotNested(f"vertex {i} violates inequality {j} by {-S[i, j]:.3e}")
    return np.maximum(S, 0.0)


def make_m_epsilon(eps):
    """The 4x4 slack family of a (1-eps)-scaled square inside the unit square.

    Rows are cyclic shifts of (2-eps, 2-eps, eps, eps); rank 3 for eps in
    [0, 1) and rank 1 at eps = 1.
    """
    if not 0.0 <= eps <= 1.0:
        raise DomainError("eps must lie in [0, 1]")
    base = np.array([2.0 - eps, 2.0 - eps, eps, eps])
    return np.array([np.roll(base, i) for i in range(4)])


def square_pair(eps):
    """The nested pair behind make_m_epsilon: (1-eps) * square inside the square."""
    if not 0.0 <= eps <= 1.0:
        raise DomainError("eps must lie in [0, 1]")
    square = np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
    P = VPolytope((1.0 - eps) * square, verified=eps < 1.0)
    C = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    Q = HPolyhedron(C, np.ones(4))
    return P, Q


def convex_hull_2d(points):
    """Indices of the convex hull of 2-d points, counterclockwise (monotone chain)."""
    pts = np.asarray(points, dtype=float)
    order = np.lexsort((pts[:, 1], pts[:, 0]))

    def cross(o, a, b):
        return (pts[a, 0] - pts[o, 0]) * (pts[b, 1] - pts[o, 1]) - (
            pts[a, 1] - pts[o, 1]
        ) * (pts[b, 0] - pts[o, 0])

    lower = []
    for idx in order:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], idx) <= 0:
            lower.pop()
        lower.append(idx)
    upper = []
    for idx in order[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], idx) <= 0:
            upper.pop()
        upper.append(idx)
    return np.array(lower[:-1] + upper[:-1], dtype=int)


def origin_in_interior_2d(P, tol=1e-12):
    """Exact-ish winding test: is 0 strictly inside the hull of P's points?"""
    hull = convex_hull_2d(P.vertices)
    if hull.size < 3:
        return False
    pts = P.vertices[hull]
    scale = max(1.0, float(np.max(np.abs(pts))))
    for i in range(len(pts)):
        a = pts[i]
        b = pts[(i + 1) % len(pts)]
        cr = (b[0] - a[0]) * (0.0 - a[1]) - (b[1] - a[1]) * (0.0 - a[0])
        if cr <= tol * scale * scale:
            return False
    return True


def _origin_in_interior_nd(P):
    # Max-margin separation probe through the LMI engine's 1x1 blocks:
    # a direction w with p_i . w <= -margin < 0 for all i certifies that 0
    # is not interior.  Deferred import; lmifeas depends on symcore only.
    from . import lmifeas

    verts = P.vertices
    v, n = verts.shape
    blocks = []
    F = np.zeros((n + 1, 1, 1))
    blk = np.zeros((v, n + 1, 1, 1))
    for i in range(v):
        for l in range(n):
            blk[i, 1 + l, 0, 0] = -verts[i, l]
    blocks = [blk[i] for i in range(v)]
    problem = lmifeas.LmiProblem(num_vars=n, blocks=blocks,
                                 bounds=(-np.ones(n), np.ones(n)))
    result = lmifeas.solve(problem, target_margin=1e-6, max_iters=4000)
    return result.status != "feasible"


def polar(P, tol=1e-12):
    """Polar dual {y : p_i^T y <= 1} of a polytope with 0 strictly interior."""
    if P.n == 2:
        inside = origin_in_interior_2d(P, tol)
    else:
        inside = _origin_in_interior_nd(P)
    if not inside:
        raise OriginNotInterior("0 is not strictly inside the polytope")
    return HPolyhedron(P.vertices.copy(), np.ones(P.num_vertices))


def hpoly_vertices_2d(Q, tol=1e-9):
    """Vertex enumeration for a bounded 2-d H-polyhedron (pairwise intersections)."""
    if Q.n != 2:
        raise DomainError("vertex enumeration implemented for n = 2 only")
    C, d = Q.C, Q.d
    f = C.shape[0]
    cands = []
    for i in range(f):
        for j in range(i + 1, f):
            A = np.array([C[i], C[j]])
            det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
            if abs(det) < 1e-14:
                continue
            x = np.linalg.solve(A, np.array([d[i], d[j]]))
            cands.append(x)
    scale = max(1.0, float(np.max(np.abs(d))))
    verts = []
    for x in cands:
        if np.all(C @ x - d <= tol * scale):
            if not any(np.max(np.abs(x - v)) <= tol * scale for v in verts):
                verts.append(x)
    if not verts:
        raise DomainError("polyhedron has no vertices (empty or unbounded)")
    verts = np.array(verts)
    hull = convex_hull_2d(verts)
    return VPolytope(verts[hull], verified=True)


def is_bounded(Q, tol=1e-12):
    """Boundedness of a 2-d H-polyhedron via angular coverage of the outer normals.

    The recession cone is trivial exactly when every angular gap between
    consecutive normals is less than pi.
    """
    if Q.n != 2:
        raise DomainError("boundedness test implemented for n = 2 only")
    norms = np.linalg.norm(Q.C, axis=1)
    live = Q.C[norms > 0.0]
    if live.shape[0] < 3:
        return False
    ang = np.sort(np.arctan2(live[:, 1], live[:, 0]))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2.0 * np.pi]]))
    return bool(np.max(gaps) < np.pi - tol)


def _strip_zeros(M):
    row_live = np.any(M > 0.0, axis=1)
    col_live = np.any(M > 0.0, axis=0)
    zero_rows = tuple(int(i) for i in np.nonzero(~row_live)[0])
    zero_cols = tuple(int(j) for j in np.nonzero(~col_live)[0])
    return M[np.ix_(row_live, col_live)], zero_rows, zero_cols


def pair_from_matrix(M, rank=3, rank_tol=symcore.RANK_TOL):
    """Nested pair (P, Q) with slack matrix equal to the row-normalized input.

    Rows are scaled by 1/(M 1)_i so the all-ones vector enters the column
    span; a ones-first rank factorization M = U V with U rows (1, u_i) then
    yields P = conv(u_i) and Q = {x : (1, x^T) V >= 0}.  The pair is
    translated so the vertex centroid of P sits at the origin.  Zero rows
    and columns are stripped symmetrically and recorded on the pair.
    """
    M = as_nonneg_matrix(M)
    if not np.any(M > 0.0):
        raise ZeroMatrix("cannot build a pair from the zero matrix")
    M, zero_rows, zero_cols = _strip_zeros(M)
    scalings = 1.0 / (M @ np.ones(M.shape[1]))
    Mn = M * scalings[:, None]
    rf = symcore.rank_factor(Mn, tol=rank_tol, ones_first=True)
    if rf.r != rank:
        raise RankMismatch(f"matrix rank {rf.r}, expected {rank}")
    u = rf.U[:, 1:]
    V = rf.V
    t = np.mean(u, axis=0)
    P = VPolytope(u - t[None, :])
    C = -V[1:, :].T
    d = V[0, :] - C @ t
    Q = HPolyhedron(C, d)
    return NestedPair(
        P=P,
        Q=Q,
        row_scalings=scalings,
        translation=t,
        zero_rows=zero_rows,
        zero_cols=zero_cols,
    )
