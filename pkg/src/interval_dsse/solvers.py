"""Interval linear solvers for ``[A] x = [B]``.

* ``mko_solve``: preconditioned Krawczyk iteration on the residual
  ``d = x - X_s`` around the midpoint solution ``X_s = C mid(B)``.
* ``krawczyk_solve``: the classical operator iterated on ``x`` itself.
* ``ige_solve``: interval Gaussian elimination.
* ``iko_solve``: Krawczyk seeded with the IGE enclosure.
* ``hull_oracle``: brute force over every endpoint combination (small systems).

``C`` is always the inverse of ``mid(A)``. Iteration counts are the number of
operator applications until the Hausdorff change drops to ``eps``.
"""

import itertools
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import (
    EliminationBreakdownError,
    InconsistencyError,
    NonConvergenceError,
    OracleLimitError,
    PreconditioningError,
    StructuralDeficiencyError,
    UsageError,
)
from .interval_core import (
    EMPTY,
    IntervalMatrix,
    IntervalVector,
    hausdorff,
    identity_minus,
    inf_norm,
    inf_norm_matrix,
    intersect,
    interval_matvec,
    interval_times_point_vector,
    point_times_interval_matrix,
    point_times_interval_vector,
)
from .interval_core import rounding as rnd
from .interval_core.arrays import _widen

DEFAULT_EPS = 1e-4
MAX_ITER = 1000


@dataclass
class SolverReport:
    solution: IntervalVector
    iterations: int
    beta: float
    alpha: float
    time_initial: float
    time_iterate: float
    converged: bool
    method: str
    history: list = field(default_factory=list)  # Hausdorff change per iteration

    @property
    def time_total(self):
        return self.time_initial + self.time_iterate


@dataclass
class Preconditioned:
    """Loop invariants shared by the Krawczyk family."""

    C: np.ndarray
    M: IntervalMatrix  # enclosure of I - C A
    beta: float


def _as_matrix(A):
    if isinstance(A, IntervalMatrix):
        return A
    if sp.issparse(A):
        return IntervalMatrix(sp.csr_array(A))
    return IntervalMatrix(np.asarray(A, dtype=float))


def _as_vector(B):
    return B if isinstance(B, IntervalVector) else IntervalVector(B)


def _check_square(A, B):
    n, k = A.shape
    if n != k:
        raise UsageError(f"A must be square, got {A.shape}")
    if B.dim != n:
        raise UsageError(f"B has dim {B.dim}, A has {n} rows")


def precondition(A):
    """``C = mid(A)^-1`` from an LU factorization; raises if ``beta >= 1``."""
    return _precondition(_as_matrix(A)).C


def _precondition(A):
    mid = A.mid()
    mid = mid.toarray() if sp.issparse(mid) else np.asarray(mid)
    try:
        lu = sla.lu_factor(mid, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise StructuralDeficiencyError(f"midpoint matrix not factorizable: {exc}") from exc
    piv = np.abs(np.diag(lu[0]))
    if piv.min() == 0.0 or piv.min() <= np.finfo(float).eps * piv.max() * mid.shape[0]:
        raise StructuralDeficiencyError("midpoint matrix is singular")
    C = sla.lu_solve(lu, np.eye(mid.shape[0]), check_finite=False)
    M = identity_minus(point_times_interval_matrix(C, A))
    beta = inf_norm_matrix(M)
    if not beta < 1.0:
        raise PreconditioningError(f"||I - CA|| = {beta:.6g} >= 1; contraction not guaranteed", beta)
    return Preconditioned(C, M, beta)


def beta_of(A):
    """``||I - mid(A)^-1 A||_inf`` (upper bound), without raising on beta >= 1."""
    A = _as_matrix(A)
    mid = A.mid()
    mid = mid.toarray() if sp.issparse(mid) else np.asarray(mid)
    C = np.linalg.inv(mid)
    return inf_norm_matrix(identity_minus(point_times_interval_matrix(C, A)))


def _alpha(pc, B):
    nb = inf_norm(point_times_interval_vector(pc.C, B))
    return rnd.up(nb / rnd.down(1.0 - pc.beta)) if nb else 0.0


def initial_box(C, A, B):
    """Symmetric box ``[-alpha, alpha]^n`` holding every solution of the system."""
    A, B = _as_matrix(A), _as_vector(B)
    _check_square(A, B)
    C = np.asarray(C, dtype=float)
    M = identity_minus(point_times_interval_matrix(C, A))
    beta = inf_norm_matrix(M)
    if not beta < 1.0:
        raise PreconditioningError(f"||I - CA|| = {beta:.6g} >= 1", beta)
    a = _alpha(Preconditioned(C, M, beta), B)
    n = B.dim
    return IntervalVector(np.full(n, -a), np.full(n, a), check=False)


def _iterate(step, x0, eps, max_iter, method):
    """Run ``x <- step(x) & x`` to a Hausdorff fixed point."""
    x = x0
    hist = []
    for it in range(1, max_iter + 1):
        nxt = intersect(step(x), x)
        if nxt is EMPTY:
            raise InconsistencyError(f"{method}: empty intersection at iteration {it}")
        h = hausdorff(nxt, x)
        hist.append(h)
        x = nxt
        if h <= eps:
            return x, it, hist
    raise NonConvergenceError(f"{method}: no convergence in {max_iter} iterations")


def mko_solve(A, B, eps=DEFAULT_EPS, max_iter=MAX_ITER):
    """Residual-form Krawczyk iteration started from the Theorem-1 box."""
    A, B = _as_matrix(A), _as_vector(B)
    _check_square(A, B)
    t0 = time.perf_counter()
    pc = _precondition(A)
    alpha = _alpha(pc, B)
    xs = pc.C @ B.mid()
    # residual term C (B - A xs), fixed across iterations
    R = point_times_interval_vector(pc.C, B - interval_times_point_vector(A, xs))
    n = B.dim
    d0 = IntervalVector(np.full(n, -alpha), np.full(n, alpha), check=False) - xs
    t1 = time.perf_counter()
    d, it, hist = _iterate(lambda d: R + interval_matvec(pc.M, d), d0, eps, max_iter, "MKO")
    x = d + xs
    t2 = time.perf_counter()
    return SolverReport(x, it, pc.beta, alpha, t1 - t0, t2 - t1, True, "MKO", hist)


def krawczyk_solve(A, B, eps=DEFAULT_EPS, X0=None, max_iter=MAX_ITER, method="Krawczyk"):
    """Classical Krawczyk operator ``(C B + (I - C A) X) & X`` from ``X0``.

    ``X0`` defaults to the Theorem-1 box.
    """
    A, B = _as_matrix(A), _as_vector(B)
    _check_square(A, B)
    t0 = time.perf_counter()
    pc = _precondition(A)
    alpha = _alpha(pc, B)
    if X0 is None:
        X0 = IntervalVector(np.full(B.dim, -alpha), np.full(B.dim, alpha), check=False)
    elif X0.dim != B.dim:
        raise UsageError("X0 dimension mismatch")
    CB = point_times_interval_vector(pc.C, B)
    t1 = time.perf_counter()
    x, it, hist = _iterate(lambda x: CB + interval_matvec(pc.M, x), X0, eps, max_iter, method)
    t2 = time.perf_counter()
    return SolverReport(x, it, pc.beta, alpha, t1 - t0, t2 - t1, True, method, hist)


# -- interval Gaussian elimination ----------------------------------------------

def _imul(al, ah, bl, bh):
    """Elementwise interval product with outward rounding (broadcasting)."""
    lo = np.minimum(np.minimum(rnd.vmul_down(al, bl), rnd.vmul_down(al, bh)),
                    np.minimum(rnd.vmul_down(ah, bl), rnd.vmul_down(ah, bh)))
    hi = np.maximum(np.maximum(rnd.vmul_up(al, bl), rnd.vmul_up(al, bh)),
                    np.maximum(rnd.vmul_up(ah, bl), rnd.vmul_up(ah, bh)))
    return lo, hi


def _idiv(al, ah, bl, bh):
    """Elementwise ``a / b`` for ``b`` not containing zero."""
    cands_lo = [rnd.vdiv_down(x, y) for x in (al, ah) for y in (bl, bh)]
    cands_hi = [rnd.vdiv_up(x, y) for x in (al, ah) for y in (bl, bh)]
    return np.minimum.reduce(cands_lo), np.maximum.reduce(cands_hi)


def _outer_imul(fl, fu, kl, ku):
    """Interval outer product f k' with every endpoint stepped one ulp outward.

    One ulp covers the round-to-nearest error of each product, underflow
    included, which keeps the O(n^3) elimination cheap.
    """
    p1 = np.multiply.outer(fl, kl)
    p2 = np.multiply.outer(fl, ku)
    p3 = np.multiply.outer(fu, kl)
    p4 = np.multiply.outer(fu, ku)
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return np.nextafter(lo, -np.inf), np.nextafter(hi, np.inf)


def ige_solve(A, B, preconditioned=False):
    """Interval Gaussian elimination with partial pivoting on ``|mid|``.

    With ``preconditioned`` the elimination runs on ``(C A, C B)`` where
    ``C = mid(A)^-1``, the usual way to keep the wrapping effect in check.
    """
    A, B = _as_matrix(A), _as_vector(B)
    _check_square(A, B)
    if preconditioned:
        pc = _precondition(A)
        CA = point_times_interval_matrix(pc.C, A)
        B = point_times_interval_vector(pc.C, B)
        L, U = np.array(CA.lo, dtype=float), np.array(CA.hi, dtype=float)
    else:
        D = A.to_dense()
        L, U = np.array(D.lo, dtype=float), np.array(D.hi, dtype=float)
    bl = np.array(B.lo, dtype=float)
    bu = np.array(B.hi, dtype=float)
    n = bl.size
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            cl, cu = L[k:, k], U[k:, k]
            ok = ~((cl <= 0.0) & (cu >= 0.0))
            if not np.any(ok):
                raise EliminationBreakdownError(f"every pivot candidate in column {k} contains 0", k)
            p = k + int(np.argmax(np.where(ok, np.abs(0.5 * cl + 0.5 * cu), -1.0)))
            if p != k:
                L[[k, p]] = L[[p, k]]
                U[[k, p]] = U[[p, k]]
                bl[[k, p]] = bl[[p, k]]
                bu[[k, p]] = bu[[p, k]]
            pl, pu = L[k, k], U[k, k]
            rows = np.nonzero((L[k + 1:, k] != 0.0) | (U[k + 1:, k] != 0.0))[0] + k + 1
            if rows.size == 0:
                continue
            fl, fu = _idiv(L[rows, k], U[rows, k], pl, pu)
            # a_ij <- a_ij - f_i a_kj over the trailing block
            cols = np.arange(k + 1, n)
            kl, ku = L[k, cols], U[k, cols]
            nz = (kl != 0.0) | (ku != 0.0)
            cols, kl, ku = cols[nz], kl[nz], ku[nz]
            if cols.size:
                ml, mu = _outer_imul(fl, fu, kl, ku)
                sub = np.ix_(rows, cols)
                L[sub] = np.nextafter(L[sub] - mu, -np.inf)
                U[sub] = np.nextafter(U[sub] - ml, np.inf)
            L[rows, k] = 0.0
            U[rows, k] = 0.0
            ml, mu = _imul(fl, fu, bl[k], bu[k])
            bl[rows], bu[rows] = rnd.vadd_down(bl[rows], -mu), rnd.vadd_up(bu[rows], -ml)
            if not (np.isfinite(bl[rows]).all() and np.isfinite(bu[rows]).all()):
                raise EliminationBreakdownError(f"overflow at elimination step {k}", k)
    if not (np.all(np.isfinite(L)) and np.all(np.isfinite(U))):
        raise EliminationBreakdownError("overflow during elimination", n)
    xl = np.zeros(n)
    xu = np.zeros(n)
    for k in range(n - 1, -1, -1):
        if L[k, k] <= 0.0 <= U[k, k]:
            raise EliminationBreakdownError(f"pivot {k} contains 0 after elimination", k)
        cols = np.nonzero((L[k, k + 1:] != 0.0) | (U[k, k + 1:] != 0.0))[0] + k + 1
        sl, su = bl[k], bu[k]
        if cols.size:
            pl_, pu_ = _imul(L[k, cols], U[k, cols], xl[cols], xu[cols])
            absb = max(abs(sl), abs(su)) + float(np.maximum(np.abs(pl_), np.abs(pu_)).sum())
            lo, hi = _widen(np.array([sl - pu_.sum()]), np.array([su - pl_.sum()]),
                            np.array([absb]), cols.size + 1)
            sl, su = lo[0], hi[0]
        ql, qu = _idiv(np.array([sl]), np.array([su]), L[k, k], U[k, k])
        xl[k], xu[k] = ql[0], qu[0]
    if not (np.all(np.isfinite(xl)) and np.all(np.isfinite(xu))):
        raise EliminationBreakdownError("overflow during back substitution", 0)
    return IntervalVector(xl, xu)


def iko_solve(A, B, eps=DEFAULT_EPS, max_iter=MAX_ITER):
    """Krawczyk iteration seeded with the (unpreconditioned) IGE enclosure."""
    A, B = _as_matrix(A), _as_vector(B)
    t0 = time.perf_counter()
    x0 = ige_solve(A, B)
    t_ige = time.perf_counter() - t0
    rep = krawczyk_solve(A, B, eps, X0=x0, max_iter=max_iter, method="IKO")
    rep.time_initial += t_ige
    return rep


def ige_report(A, B):
    t0 = time.perf_counter()
    x = ige_solve(A, B)
    return SolverReport(x, 0, float("nan"), float("nan"), time.perf_counter() - t0, 0.0, True, "IGE")


SOLVERS = {
    "mko": mko_solve,
    "krawczyk": krawczyk_solve,
    "iko": iko_solve,
    "ige": lambda A, B, eps=DEFAULT_EPS: ige_report(A, B),
}


def solve(method, A, B, eps=DEFAULT_EPS):
    try:
        fn = SOLVERS[method.lower()]
    except KeyError:
        raise UsageError(f"unknown solver {method!r}; choose from {sorted(SOLVERS)}") from None
    return fn(A, B, eps=eps)


# -- vertex hull oracle -----------------------------------------------------------

ORACLE_MAX_ENTRIES = 20


def hull_oracle(A, B, chunk=1 << 14):
    """Componentwise min/max over the solutions of every endpoint system.

    An inner estimate of the solution hull: every true enclosure must
    contain it.
    """
    A, B = _as_matrix(A), _as_vector(B)
    _check_square(A, B)
    D = A.to_dense()
    L, U = np.asarray(D.lo), np.asarray(D.hi)
    a_idx = np.argwhere(L != U)
    b_idx = np.nonzero(B.lo != B.hi)[0]
    k = len(a_idx) + len(b_idx)
    if k > ORACLE_MAX_ENTRIES:
        raise OracleLimitError(f"{k} interval entries exceed the oracle limit {ORACLE_MAX_ENTRIES}")
    n = B.dim
    lo = np.full(n, np.inf)
    hi = np.full(n, -np.inf)
    combos = np.array(list(itertools.product((0, 1), repeat=k)), dtype=bool).reshape(1 << k, k)
    for s in range(0, combos.shape[0], chunk):
        c = combos[s: s + chunk]
        m = c.shape[0]
        As = np.broadcast_to(L, (m, n, n)).copy()
        Bs = np.broadcast_to(B.lo, (m, n)).copy()
        for t, (i, j) in enumerate(a_idx):
            As[:, i, j] = np.where(c[:, t], U[i, j], L[i, j])
        for t, i in enumerate(b_idx):
            Bs[:, i] = np.where(c[:, len(a_idx) + t], B.hi[i], B.lo[i])
        try:
            X = np.linalg.solve(As, Bs[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise StructuralDeficiencyError(f"singular vertex system: {exc}") from exc
        if not np.all(np.isfinite(X)):
            raise StructuralDeficiencyError("singular vertex system")
        lo = np.minimum(lo, X.min(axis=0))
        hi = np.maximum(hi, X.max(axis=0))
    return IntervalVector(lo, hi)
