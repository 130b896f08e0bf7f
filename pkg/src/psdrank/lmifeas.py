"""Feasibility engine for block-diagonal linear matrix inequalities.

Find y with F_0^b + sum_l y_l F_l^b psd for every block b, or produce a
Farkas-type dual ray (per-block psd matrices Z_b with
sum_b <F_l^b, Z_b> = 0 for l >= 1 and sum_b <F_0^b, Z_b> < 0) certifying
that no such y exists.

Primal side: subgradient ascent on the concave margin
phi(y) = min_b lambda_min(F^b(y)) with adaptive Polyak target levels; the
supergradient at the worst block is the outer-product quadratic form of
its bottom eigenvector.  Dual side: the alternative system is itself a
block LMI over the affine subspace cut out by the linear conditions, and
is attacked with the same ascent, warm-started from eigenvector outer
products accumulated along the stalled primal run.

Every claim is re-verified through the symcore eigensolver before it is
returned; when no verification passes the result is Undetermined.  This
engine is sized for desk-scale problems (blocks up to ~6x6, tens of
variables); it trades speed for verifiability.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import backend, symcore
from .errors import DimensionMismatch

log = logging.getLogger(__name__)

#: default strict-interior margin requested after per-block normalization
STRICT_MARGIN = 1e-7


@dataclass
class LmiProblem:
    """Blocks b given as arrays of shape (m+1, s_b, s_b); index 0 is F_0^b."""

    num_vars: int
    blocks: list
    bounds: tuple | None = None

    def __post_init__(self):
        self.blocks = [np.asarray(b, dtype=float) for b in self.blocks]
        for i, b in enumerate(self.blocks):
            if b.ndim != 3 or b.shape[0] != self.num_vars + 1 or b.shape[1] != b.shape[2]:
                raise DimensionMismatch("block must have shape (num_vars+1, s, s)")
            if b.shape[1] < 1:
                raise DimensionMismatch("blocks must be at least 1x1")
            self.blocks[i] = 0.5 * (b + b.transpose(0, 2, 1))

    def evaluate(self, y, block_index):
        b = self.blocks[block_index]
        return b[0] + np.tensordot(y, b[1:], axes=(0, 0))


@dataclass
class FeasResult:
    """status is one of "feasible", "infeasible", "undetermined".

    ``margin`` is the best primal margin found (minimum eigenvalue across
    blocks, original scale).  ``dual`` carries the per-block Farkas ray on
    infeasible results, normalized to sum_b <F_0^b, Z_b> = -1.
    """

    status: str
    margin: float
    y: np.ndarray | None = None
    dual: list | None = None
    iterations: int = 0
    detail: dict = field(default_factory=dict)


def verify_point(problem, y, tol=1e-8):
    """True iff every block evaluated at y has min eigenvalue >= -tol."""
    y = np.asarray(y, dtype=float)
    if y.shape != (problem.num_vars,):
        raise DimensionMismatch("y length does not match num_vars")
    for bi in range(len(problem.blocks)):
        if symcore.min_eig(problem.evaluate(y, bi)) < -tol:
            return False
    return True


def verify_ray(problem, Z, tol=1e-8):
    """True iff Z is a valid Farkas ray for the problem, to tolerance tol.

    Conditions: every Z_b psd to -tol, sum_b <F_l^b, Z_b> = 0 within tol for
    each l >= 1, and sum_b <F_0^b, Z_b> <= -tol.
    """
    if len(Z) != len(problem.blocks):
        raise DimensionMismatch("one dual matrix required per block")
    for Zb, Fb in zip(Z, problem.blocks):
        Zb = np.asarray(Zb, dtype=float)
        if Zb.shape != Fb.shape[1:]:
            raise DimensionMismatch("dual block size mismatch")
        if symcore.min_eig(Zb) < -tol:
            return False
    for l in range(1, problem.num_vars + 1):
        acc = sum(float(np.sum(Fb[l] * Zb)) for Fb, Zb in zip(problem.blocks, Z))
        if abs(acc) > tol:
            return False
    obj = sum(float(np.sum(Fb[0] * Zb)) for Fb, Zb in zip(problem.blocks, Z))
    return obj <= -tol


class _Grouped:
    """Blocks grouped by size for batched eigendecompositions."""

    def __init__(self, blocks):
        sizes = sorted({b.shape[1] for b in blocks})
        self.groups = []
        for s in sizes:
            idx = np.array([i for i, b in enumerate(blocks) if b.shape[1] == s])
            tensor = np.stack([blocks[i] for i in idx])
            self.groups.append((idx, tensor))

    def margin(self, y):
        """(worst margin, worst block index, bottom eigenvector of that block)."""
        worst = np.inf
        wb = -1
        wv = None
        for idx, T in self.groups:
            G = T[:, 0] + np.tensordot(y, T[:, 1:], axes=(0, 1))
            w, v, _ = backend.batch_eigh(G)
            b = int(np.argmin(w[:, 0]))
            if w[b, 0] < worst:
                worst = float(w[b, 0])
                wb = int(idx[b])
                wv = v[b][:, 0].copy()
        return worst, wb, wv


def _ascend(blocks, num_vars, bounds, y0, max_iters, target, seed,
            harvest=None, patience=60):
    """Adaptive-Polyak subgradient ascent on the block margin.

    Returns (best margin, best y, iterations used).  When ``harvest`` is a
    list, the (block, eigenvector) witness of the worst block is appended
    at every improvement of the incumbent.
    """
    grouped = _Grouped(blocks)
    lo, hi = (None, None) if bounds is None else bounds
    y = np.array(y0, dtype=float)
    best = -np.inf
    y_best = y.copy()
    phi, wb, wv = grouped.margin(y)
    delta = max(0.1, 0.5 * abs(phi))
    last_gain = 0
    it = 0
    for it in range(1, max_iters + 1):
        if phi > best:
            best = phi
            y_best = y.copy()
            last_gain = it
            if harvest is not None:
                harvest.append((wb, wv))
        if best >= target:
            break
        g = np.einsum("i,lij,j->l", wv, blocks[wb][1:], wv)
        gn2 = float(g @ g)
        if gn2 < 1e-28:
            break
        step = (best + delta - phi) / gn2
        y = y + step * g
        if lo is not None:
            np.clip(y, lo, hi, out=y)
        if it - last_gain > patience:
            delta *= 0.5
            last_gain = it
            if delta < 1e-12:
                break
        phi, wb, wv = grouped.margin(y)
    return best, y_best, it


def _normalize(blocks):
    scales = np.array([max(1e-300, float(np.max(np.abs(b)))) for b in blocks])
    return [b / s for b, s in zip(blocks, scales)], scales


def _svec_stack(blocks_row):
    return np.concatenate([symcore.svec(B) for B in blocks_row])


def _alternative_problem(blocks_norm, num_vars):
    """The Farkas alternative as an LMI over the null space of the linear conditions.

    Returns (problem, z_part, N, offsets, ok) where Z candidates are
    smat slices of z_part + N @ t.
    """
    dims = [b.shape[1] for b in blocks_norm]
    svds = [d * (d + 1) // 2 for d in dims]
    offsets = np.concatenate([[0], np.cumsum(svds)])
    D = int(offsets[-1])
    rows = []
    for l in range(1, num_vars + 1):
        rows.append(_svec_stack([b[l] for b in blocks_norm]))
    r0 = _svec_stack([b[0] for b in blocks_norm])
    A = np.vstack(rows + [r0]) if rows else r0[None, :]
    rhs = np.zeros(A.shape[0])
    rhs[-1] = -1.0
    z_part, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    if np.max(np.abs(A @ z_part - rhs)) > 1e-7:
        return None, None, None, None, False
    _, sv, Vt = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(sv > 1e-12 * (sv[0] if sv.size else 1.0)))
    N = Vt[rank:].T
    if N.shape[1] == 0:
        N = np.zeros((D, 0))
    alt_blocks = []
    for bi, d in enumerate(dims):
        sl = slice(int(offsets[bi]), int(offsets[bi + 1]))
        tensor = np.empty((N.shape[1] + 1, d, d))
        tensor[0] = symcore.smat(z_part[sl])
        for t in range(N.shape[1]):
            tensor[1 + t] = symcore.smat(N[sl, t])
        alt_blocks.append(tensor)
    problem = LmiProblem(num_vars=N.shape[1], blocks=alt_blocks)
    return problem, z_part, N, offsets, True


def _harvest_warm_start(harvest, blocks_norm, z_part, N, offsets):
    """Project accumulated worst-block eigenvector outer products onto the
    dual affine subspace to seed the alternative ascent."""
    if not harvest:
        return None
    dims = [b.shape[1] for b in blocks_norm]
    Z = [np.zeros((d, d)) for d in dims]
    for wb, wv in harvest[-400:]:
        Z[wb] += np.outer(wv, wv)
    zh = np.concatenate([symcore.svec(Zb) for Zb in Z])
    obj = float(np.concatenate([symcore.svec(b[0]) for b in blocks_norm]) @ zh)
    if obj >= -1e-12:
        return None
    zh *= -1.0 / obj
    return N.T @ (zh - z_part)


def solve(problem, tol=1e-8, max_iters=20000, target_margin=None, seed=0,
          want_dual=True):
    """Decide feasibility of the block LMI; see the module docstring.

    ``target_margin`` is the margin (after per-block normalization) at which
    the primal ascent stops early; the default requests a strictly interior
    point.  Feasible is returned only when verify_point passes at ``tol``
    on the original problem, Infeasible only when verify_ray passes.
    """
    blocks_norm, scales = _normalize(problem.blocks)
    target = STRICT_MARGIN if target_margin is None else target_margin
    rng = np.random.default_rng(seed)
    harvest = []
    best = -np.inf
    y_best = np.zeros(problem.num_vars)
    iters = 0
    starts = [np.zeros(problem.num_vars)]
    if problem.num_vars:
        starts.append(0.1 * rng.standard_normal(problem.num_vars))
    for y0 in starts:
        m, y, used = _ascend(blocks_norm, problem.num_vars, problem.bounds, y0,
                             max_iters, target, seed, harvest=harvest)
        iters += used
        if m > best:
            best, y_best = m, y
        if best >= target:
            break
    margin_orig = min(
        symcore.min_eig(problem.evaluate(y_best, bi))
        for bi in range(len(problem.blocks))
    )
    if margin_orig >= -tol and verify_point(problem, y_best, tol):
        return FeasResult(status="feasible", margin=float(margin_orig), y=y_best,
                          iterations=iters, detail={"normalized_margin": best})
    if want_dual:
        ray = _dual_attempt(problem, blocks_norm, scales, harvest, max_iters,
                            rng, tol, iters)
        if ray is not None:
            Z, dual_iters = ray
            return FeasResult(status="infeasible", margin=float(margin_orig),
                              dual=Z, iterations=iters + dual_iters,
                              detail={"normalized_margin": best})
    return FeasResult(status="undetermined", margin=float(margin_orig), y=y_best,
                      iterations=iters, detail={"normalized_margin": best})


def _dual_attempt(problem, blocks_norm, scales, harvest, max_iters, rng, tol,
                  primal_iters):
    alt, z_part, N, offsets, ok = _alternative_problem(blocks_norm, problem.num_vars)
    if not ok:
        return None
    starts = []
    warm = _harvest_warm_start(harvest, blocks_norm, z_part, N, offsets)
    if warm is not None:
        starts.append(warm)
    starts.append(np.zeros(alt.num_vars))
    if alt.num_vars:
        starts.append(0.1 * rng.standard_normal(alt.num_vars))
    total = 0
    for t0 in starts:
        m, t_best, used = _ascend(alt.blocks, alt.num_vars, None, t0,
                                  max_iters, STRICT_MARGIN, 0)
        total += used
        if m < -1e-6:
            continue
        z = z_part + (N @ t_best if alt.num_vars else 0.0)
        dims = [b.shape[1] for b in blocks_norm]
        Z = []
        for bi, d in enumerate(dims):
            sl = slice(int(offsets[bi]), int(offsets[bi + 1]))
            Zb = symcore.smat(z[sl])
            Zb = symcore.project_psd(Zb)
            Z.append(Zb / scales[bi])
        obj = sum(float(np.sum(Fb[0] * Zb)) for Fb, Zb in zip(problem.blocks, Z))
        if obj < 0.0:
            Z = [Zb / (-obj) for Zb in Z]
        if verify_ray(problem, Z, tol):
            return Z, total
    return None
