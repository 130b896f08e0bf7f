"""Spectrahedral lifts of polytopes.

A lift is a linear matrix pencil g(x) = x_1 G_1 + ... + x_{d-1} G_{d-1} + G_d
together with a linear projection; the represented set is
{proj @ x : g(x) psd}.  This module provides the pencil calculus (facet
augmentation, projection composition), the hexagon-to-octahedron lift with
its biplanarity certificate, and extraction of explicit psd factorizations
from a lift sandwiched between nested bodies.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import lmifeas, symcore
from .errors import (
    CollinearVertices,
    DegenerateParameters,
    DimensionMismatch,
    NoDualWitness,
    NotConvex,
    VertexNotInLift,
    WrongVertexCount,
)
from .polyform import slack_matrix
from .psdfact import PsdFactorization, verify_factorization


@dataclass
class SpectraLift:
    """Pencil matrices G (stack of d, size k) and projection proj (n x (d-1))."""

    G: np.ndarray
    proj: np.ndarray

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=float)
        self.proj = np.atleast_2d(np.asarray(self.proj, dtype=float))
        if self.G.ndim != 3 or self.G.shape[1] != self.G.shape[2]:
            raise DimensionMismatch("pencil must be a stack of square matrices")
        if self.proj.shape[1] != self.G.shape[0] - 1:
            raise DimensionMismatch("projection must have d-1 columns")
        self.G = 0.5 * (self.G + self.G.transpose(0, 2, 1))

    @property
    def k(self):
        return self.G.shape[1]

    @property
    def d(self):
        return self.G.shape[0]

    @property
    def n(self):
        return self.proj.shape[0]

    def pencil(self, x):
        """Evaluate g(x) = sum x_l G_l + G_d."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d - 1,):
            raise DimensionMismatch("pencil point has wrong length")
        return np.tensordot(x, self.G[:-1], axes=(0, 0)) + self.G[-1]

    def margin(self, x):
        """Smallest pencil eigenvalue at x; >= 0 means x is in the spectrahedron."""
        return symcore.min_eig(self.pencil(x))


def unit_disk_lift():
    """The unit disk {x^2 + y^2 <= 1} as the pencil [[1+x, y], [y, 1-x]]."""
    G = np.array([
        [[1.0, 0.0], [0.0, -1.0]],
        [[0.0, 1.0], [1.0, 0.0]],
        [[1.0, 0.0], [0.0, 1.0]],
    ])
    return SpectraLift(G=G, proj=np.eye(2))


@dataclass
class HexagonCanonical:
    """Affine-normal form of a strictly convex hexagon.

    The map x -> T @ x + shift sends the input hexagon's vertices 1, 3, 5
    to (1,0), (0,1), (0,0); (a,b), (c,d), (e,f) are the images of vertices
    2, 4, 6 and land in the first, second, and fourth quadrants with
    a+b > 1, c+d < 1, e+f < 1.
    """

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float
    T: np.ndarray
    shift: np.ndarray

    @property
    def params(self):
        return (self.a, self.b, self.c, self.d, self.e, self.f)

    def canonical_vertices(self):
        return np.array([
            [1.0, 0.0],
            [self.a, self.b],
            [0.0, 1.0],
            [self.c, self.d],
            [0.0, 0.0],
            [self.e, self.f],
        ])

    def to_input(self, points):
        """Map canonical-frame points back to the input frame."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.solve(self.T, (points - self.shift[None, :]).T).T


@dataclass
class Octahedron:
    """Combinatorial octahedron with four vertices on coordinate planes.

    Vertices: (0,0,0), (1,0,0), (0,1,0), (0,0,1), (v1,0,v3), (0,w2,w3)
    with v1 < 0 < v3, w2 < 0 < w3, v1+v3 < 1, w2+w3 < 1.
    """

    v1: float
    v3: float
    w2: float
    w3: float

    def __post_init__(self):
        ok = (
            self.v1 < 0.0 < self.v3
            and self.w2 < 0.0 < self.w3
            and self.v1 + self.v3 < 1.0
            and self.w2 + self.w3 < 1.0
        )
        if not ok:
            raise DegenerateParameters("octahedron sign conditions violated")

    @property
    def vertices(self):
        return np.array([
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [self.v1, 0.0, self.v3],
            [0.0, self.w2, self.w3],
        ])


def _cyclic_crosses(V):
    n = len(V)
    out = np.empty(n)
    for i in range(n):
        a, b, c = V[i], V[(i + 1) % n], V[(i + 2) % n]
        out[i] = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
    return out


def normalize_hexagon(H):
    """Canonicalize a strictly convex hexagon given in cyclic vertex order.

    Clockwise input is reversed (keeping the starting vertex); the affine
    normal form depends on the starting vertex, which is fine since any
    valid canonicalization works.
    """
    V = H.vertices
    if V.shape != (6, 2):
        raise WrongVertexCount("expected six vertices in the plane")
    scale = max(1.0, float(np.max(np.abs(V))))
    cr = _cyclic_crosses(V)
    if np.min(np.abs(cr)) <= 1e-12 * scale * scale:
        raise CollinearVertices("three consecutive vertices are collinear")
    if np.all(cr < 0.0):
        V = V[[0, 5, 4, 3, 2, 1]]
        cr = _cyclic_crosses(V)
    if not np.all(cr > 0.0):
        raise NotConvex("vertices are not in strictly convex cyclic order")
    p1, p2, p3, p4, p5, p6 = V
    basis = np.column_stack([p1 - p5, p3 - p5])
    T = np.linalg.inv(basis)
    shift = -T @ p5
    a, b = T @ p2 + shift
    c, d = T @ p4 + shift
    e, f = T @ p6 + shift
    ok = a > 0 and b > 0 and a + b > 1 and c < 0 and d > 0 and c + d < 1 and e > 0 and f < 0 and e + f < 1
    if not ok:
        raise NotConvex("canonical quadrant conditions failed; input is not strictly convex")
    return HexagonCanonical(a=a, b=b, c=c, d=d, e=e, f=f, T=T, shift=shift)


def hex_octahedron_lift(Hc):
    """Octahedron and 2x3 projection realizing the canonical hexagon as a shadow.

    The projection matrix is [[1,0,a],[0,1,b]]; it carries the six
    octahedron vertices onto the six hexagon vertices.
    """
    a, b, c, d, e, f = Hc.params
    if a == 0.0 or b == 0.0:
        raise DegenerateParameters("canonical parameters a and b must be nonzero")
    O = Octahedron(v1=c - a * d / b, v3=d / b, w2=f - b * e / a, w3=e / a)
    proj = np.array([[1.0, 0.0, a], [0.0, 1.0, b]])
    return O, proj


def is_biplanar(O, tol=1e-9):
    """Two distinct planes each containing four vertices, if they exist.

    Returns (flag, list of plane normals).  Lifts produced here satisfy it
    with the coordinate planes y = 0 and x = 0; for arbitrary octahedra all
    4-subsets are tested for coplanarity by a determinant check.
    """
    V = O.vertices if isinstance(O, Octahedron) else np.asarray(O, dtype=float)
    scale = max(1.0, float(np.max(np.abs(V))))
    planes = []
    for subset in itertools.combinations(range(len(V)), 4):
        pts = V[list(subset)]
        diffs = pts[1:] - pts[0]
        det = float(np.linalg.det(diffs))
        if abs(det) > tol * scale ** 3:
            continue
        # normal from the best-conditioned pair of difference vectors
        pairs = [(0, 1), (0, 2), (1, 2)]
        normal = None
        best = 0.0
        for (r, s) in pairs:
            cand = np.cross(diffs[r], diffs[s])
            norm = float(np.linalg.norm(cand))
            if norm > best:
                best = norm
                normal = cand / norm
        if normal is None or best <= tol * scale:
            continue
        if normal[np.argmax(np.abs(normal))] < 0:
            normal = -normal
        offset = float(normal @ pts[0])
        if not any(
            np.linalg.norm(normal - n0) < 1e-6 and abs(offset - o0) < 1e-6 * scale
            for n0, o0 in planes
        ):
            planes.append((normal, offset))
        if len(planes) >= 2:
            return True, [planes[0][0], planes[1][0]]
    return False, [n for n, _ in planes]


def augment_facet(L, a0, a):
    """Lift of (represented set) intersected with {a0 + a . y >= 0}.

    The pencil grows by one diagonal slot carrying the inequality; block
    structure makes the membership semantics exact.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.shape[0] != L.n:
        raise DimensionMismatch("inequality lives in the target space")
    coeffs = L.proj.T @ a
    tilde = np.concatenate([coeffs, [float(a0)]])
    k = L.k
    G = np.zeros((L.d, k + 1, k + 1))
    G[:, :k, :k] = L.G
    G[:, k, k] = tilde
    return SpectraLift(G=G, proj=L.proj.copy())


def project_lift(L, A):
    """Compose the lift with a further linear map on the target space."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] != L.n:
        raise DimensionMismatch("map must accept the lift's target dimension")
    return SpectraLift(G=L.G.copy(), proj=A @ L.proj)


def _null_space(A, rtol=1e-12):
    u, s, vt = np.linalg.svd(A, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > rtol * max(1.0, smax)))
    return vt[rank:].T


def _feasible_point_on_slice(L, x0, N, tol):
    """Interior-preferring point of {x0 + N z : g(x) psd}, or None."""
    if N.shape[1] == 0:
        return x0 if L.margin(x0) >= -tol else None
    const = L.pencil(x0)
    tensor = np.empty((N.shape[1] + 1, L.k, L.k))
    tensor[0] = const
    for t in range(N.shape[1]):
        tensor[1 + t] = np.tensordot(N[:, t], L.G[:-1], axes=(0, 0))
    problem = lmifeas.LmiProblem(num_vars=N.shape[1], blocks=[tensor])
    result = lmifeas.solve(problem, tol=tol, max_iters=8000, want_dual=False)
    if result.status != "feasible":
        return None
    return x0 + N @ result.y


def factorization_from_lift(L, P, Q, tol=1e-8):
    """Psd factorization of slack_matrix(P, Q) through a lift of a body between them.

    Row factors are pencil values over preimages of the vertices of P
    (any point of the fiber works; an interior one is preferred for
    conditioning).  Column factors solve the linear coefficient system
    that makes <g(x), B_j> reproduce the facet slack identically in x,
    subject to psd-ness.
    """
    if P.n != L.n or Q.n != L.n:
        raise DimensionMismatch("bodies and lift target dimensions differ")
    S = slack_matrix(P, Q)
    d = L.d
    k = L.k
    proj_null = _null_space(L.proj)
    A_list = []
    for i, p in enumerate(P.vertices):
        x0, res, *_ = np.linalg.lstsq(L.proj, p, rcond=None)
        if np.max(np.abs(L.proj @ x0 - p)) > 1e-9 * max(1.0, float(np.max(np.abs(p)))):
            raise VertexNotInLift(f"vertex {i} is outside the projection's range")
        x = _feasible_point_on_slice(L, x0, proj_null, tol)
        if x is None:
            raise VertexNotInLift(f"no psd pencil point above vertex {i}")
        Ai = L.pencil(x)
        if symcore.min_eig(Ai) < 0.0:
            Ai = symcore.project_psd(Ai)
        A_list.append(Ai)
    # facet side: <G_l, B> = -(proj^T c_j)_l for l < d, <G_d, B> = d_j
    G_rows = np.stack([symcore.svec(L.G[l]) for l in range(d)])
    B_list = []
    for j in range(Q.num_inequalities):
        rhs = np.concatenate([-(L.proj.T @ Q.C[j]), [Q.d[j]]])
        beta0, *_ = np.linalg.lstsq(G_rows, rhs, rcond=None)
        if np.max(np.abs(G_rows @ beta0 - rhs)) > 1e-9 * max(1.0, float(np.max(np.abs(rhs)))):
            raise NoDualWitness(f"facet {j}: coefficient system is inconsistent")
        N = _null_space(G_rows)
        if N.shape[1] == 0:
            Bj = symcore.smat(beta0)
            if symcore.min_eig(Bj) < -tol:
                raise NoDualWitness(f"facet {j}: unique coefficient solution is not psd")
        else:
            tensor = np.empty((N.shape[1] + 1, k, k))
            tensor[0] = symcore.smat(beta0)
            for t in range(N.shape[1]):
                tensor[1 + t] = symcore.smat(N[:, t])
            problem = lmifeas.LmiProblem(num_vars=N.shape[1], blocks=[tensor])
            result = lmifeas.solve(problem, tol=tol, max_iters=8000, want_dual=False)
            if result.status != "feasible":
                raise NoDualWitness(f"facet {j}: no psd solution of the coefficient system")
            Bj = symcore.smat(beta0 + N @ result.y)
        if symcore.min_eig(Bj) < 0.0:
            Bj = symcore.project_psd(Bj)
        B_list.append(Bj)
    F = PsdFactorization(k=k, A=np.array(A_list), B=np.array(B_list), residual=np.inf)
    report = verify_factorization(S, F, tol=tol)
    F.residual = report.max_residual
    if not report.passed:
        raise NoDualWitness(
            f"assembled lift factorization failed verification (residual {report.max_residual:.2e})"
        )
    return F
