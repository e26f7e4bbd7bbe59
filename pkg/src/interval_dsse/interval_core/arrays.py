"""Interval vectors and matrices stored as paired endpoint arrays.

Elementwise operations use the error-free transformations in ``rounding``.
Dot products are evaluated with BLAS in round-to-nearest and then widened by
an a-priori bound on the accumulated rounding error:

    |fl(sum p_k) - sum p_k| <= gamma(n) * sum |p_k|   (+ an underflow term)

which is far cheaper than stepping every partial sum and still rigorous.
Matrices may hold dense ndarrays or scipy CSR arrays (same pattern for both
endpoints); unstored entries are the thin interval [0, 0].
"""

import numpy as np
import scipy.sparse as sp

from ..errors import DomainError, UsageError
from . import rounding as rnd
from .scalar import EMPTY, Interval

# Below this the relative error term no longer dominates underflow losses.
_UNDERFLOW_GUARD = 2.0 ** -960


def _as_float_array(x):
    a = np.array(x, dtype=float)
    return a


def _check_endpoints(lo, hi):
    if lo.shape != hi.shape:
        raise UsageError(f"endpoint shapes differ: {lo.shape} vs {hi.shape}")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise DomainError("interval endpoints must be finite")
    if np.any(lo > hi):
        bad = np.argwhere(lo > hi)[0]
        raise UsageError(f"inverted interval endpoints at {tuple(bad)}")


def _widen(lo_f, hi_f, absbound, nterms):
    """Outward-widen computed sums by the gamma bound on their rounding error."""
    g = rnd.gamma(2 * nterms + 4)
    e = rnd.vmul_up(absbound, g)
    e = np.where(absbound < _UNDERFLOW_GUARD, rnd.vadd_up(e, nterms * rnd.ETA), e)
    return rnd.vadd_down(lo_f, -e), rnd.vadd_up(hi_f, e)


class IntervalVector:
    """Vector of closed intervals, endpoints in two 1-D float arrays."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None, check=True):
        lo = _as_float_array(lo).reshape(-1)
        hi = lo.copy() if hi is None else _as_float_array(hi).reshape(-1)
        if check:
            _check_endpoints(lo, hi)
            if lo.size == 0:
                raise UsageError("IntervalVector needs dim > 0")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("IntervalVector is immutable")

    @classmethod
    def from_intervals(cls, items):
        items = list(items)
        return cls([a.lo for a in items], [a.hi for a in items])

    @classmethod
    def from_midrad(cls, mid, rad):
        mid = _as_float_array(mid).reshape(-1)
        rad = _as_float_array(rad).reshape(-1)
        if np.any(rad < 0):
            raise UsageError("negative radius")
        return cls(rnd.vadd_down(mid, -rad), rnd.vadd_up(mid, rad))

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n))

    @property
    def dim(self):
        return self.lo.size

    def __len__(self):
        return self.lo.size

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return Interval(self.lo[idx], self.hi[idx])
        return IntervalVector(self.lo[idx], self.hi[idx], check=False)

    def __iter__(self):
        for a, b in zip(self.lo, self.hi):
            yield Interval(a, b)

    def mid(self):
        return 0.5 * self.lo + 0.5 * self.hi

    def rad(self):
        return 0.5 * self.width()

    def width(self):
        return rnd.vadd_up(self.hi, -self.lo)

    def mag(self):
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def is_thin(self):
        return bool(np.all(self.lo == self.hi))

    def contains(self, x, slack=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all((self.lo - slack <= x) & (x <= self.hi + slack)))

    def is_subset(self, other, slack=0.0):
        return bool(np.all((other.lo - slack <= self.lo) & (self.hi <= other.hi + slack)))

    def intersect(self, other):
        return intersect(self, other)

    def hull(self, other):
        return IntervalVector(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi), check=False)

    def __neg__(self):
        return IntervalVector(-self.hi, -self.lo, check=False)

    def __add__(self, other):
        if isinstance(other, IntervalVector):
            return IntervalVector(rnd.vadd_down(self.lo, other.lo), rnd.vadd_up(self.hi, other.hi), check=False)
        x = np.broadcast_to(np.asarray(other, dtype=float), self.lo.shape)
        return IntervalVector(rnd.vadd_down(self.lo, x), rnd.vadd_up(self.hi, x), check=False)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        """Multiply every element by the point vector or scalar ``c``."""
        c = np.broadcast_to(np.asarray(c, dtype=float), self.lo.shape)
        a = rnd.vmul_down(c, self.lo)
        b = rnd.vmul_down(c, self.hi)
        lo = np.where(c >= 0, a, b)
        a = rnd.vmul_up(c, self.lo)
        b = rnd.vmul_up(c, self.hi)
        hi = np.where(c >= 0, b, a)
        return IntervalVector(lo, hi, check=False)

    def concat(self, other):
        return IntervalVector(np.concatenate([self.lo, other.lo]), np.concatenate([self.hi, other.hi]), check=False)

    def __eq__(self, other):
        if not isinstance(other, IntervalVector):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    __hash__ = None

    def __repr__(self):
        if self.dim <= 6:
            body = ", ".join(f"[{a:.6g}, {b:.6g}]" for a, b in zip(self.lo, self.hi))
        else:
            body = f"dim={self.dim}"
        return f"IntervalVector({body})"


class IntervalMatrix:
    """Interval matrix; ``lo``/``hi`` are both dense ndarrays or both CSR arrays."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None, check=True):
        if sp.issparse(lo):
            lo = sp.csr_array(lo, dtype=float)
            hi = lo.copy() if hi is None else sp.csr_array(hi, dtype=float)
            if lo.shape == hi.shape:
                lo, hi = _align_patterns(lo, hi)
            if check:
                if lo.shape != hi.shape:
                    raise UsageError("endpoint shapes differ")
                d = hi - lo
                if d.nnz and d.data.min() < 0:
                    raise UsageError("inverted interval endpoints")
                for m in (lo, hi):
                    if not np.all(np.isfinite(m.data)):
                        raise DomainError("interval endpoints must be finite")
        else:
            lo = np.array(lo, dtype=float)
            hi = lo.copy() if hi is None else np.array(hi, dtype=float)
            if lo.ndim != 2:
                raise UsageError("IntervalMatrix needs a 2-D array")
            if check:
                _check_endpoints(lo, hi)
            lo.setflags(write=False)
            hi.setflags(write=False)
        if check and (lo.shape[0] == 0 or lo.shape[1] == 0):
            raise UsageError("IntervalMatrix dimensions must be positive")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("IntervalMatrix is immutable")

    @classmethod
    def from_triplets(cls, rows, cols, lo, hi, shape):
        """Build a sparse interval matrix; duplicate (i, j) pairs are rejected."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        key = rows * shape[1] + cols
        if np.unique(key).size != key.size:
            raise UsageError("duplicate entries in triplet list")
        L = sp.csr_array((np.asarray(lo, float), (rows, cols)), shape=shape)
        H = sp.csr_array((np.asarray(hi, float), (rows, cols)), shape=shape)
        # keep identical sparsity patterns even where one endpoint is 0
        L, H = _align_patterns(L, H)
        return cls(L, H)

    @classmethod
    def identity(cls, n, sparse=False):
        if sparse:
            return cls(sp.identity(n, format="csr"))
        return cls(np.eye(n))

    @property
    def shape(self):
        return self.lo.shape

    @property
    def is_sparse(self):
        return sp.issparse(self.lo)

    def __getitem__(self, ij):
        i, j = ij
        return Interval(float(self.lo[i, j]), float(self.hi[i, j]))

    def to_dense(self):
        if not self.is_sparse:
            return self
        return IntervalMatrix(self.lo.toarray(), self.hi.toarray(), check=False)

    def to_sparse(self):
        if self.is_sparse:
            return self
        L, H = _align_patterns(sp.csr_array(self.lo), sp.csr_array(self.hi))
        return IntervalMatrix(L, H, check=False)

    def mid(self):
        return 0.5 * self.lo + 0.5 * self.hi

    def rad(self):
        return 0.5 * (self.hi - self.lo) if self.is_sparse else 0.5 * rnd.vadd_up(self.hi, -self.lo)

    def mag(self):
        if self.is_sparse:
            return abs(self.lo).maximum(abs(self.hi))
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def is_thin(self):
        if self.is_sparse:
            return (self.hi - self.lo).count_nonzero() == 0
        return bool(np.all(self.lo == self.hi))

    def interval_count(self):
        """Number of entries with nonzero width."""
        if self.is_sparse:
            return int((self.hi - self.lo).count_nonzero())
        return int(np.count_nonzero(self.hi != self.lo))

    @property
    def T(self):
        return IntervalMatrix(self.lo.T, self.hi.T, check=False)

    def contains(self, A, slack=0.0):
        L, H = self.to_dense().lo, self.to_dense().hi
        A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
        return bool(np.all((L - slack <= A) & (A <= H + slack)))

    def __neg__(self):
        return IntervalMatrix(-self.hi, -self.lo, check=False)

    def __eq__(self, other):
        if not isinstance(other, IntervalMatrix):
            return NotImplemented
        a, b = self.to_dense(), other.to_dense()
        return a.shape == b.shape and np.array_equal(a.lo, b.lo) and np.array_equal(a.hi, b.hi)

    __hash__ = None

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"IntervalMatrix({self.shape[0]}x{self.shape[1]}, {kind})"


def _align_patterns(L, H):
    pat = sp.coo_array(abs(L) + abs(H))
    pat.eliminate_zeros()
    r, c = pat.row, pat.col
    L, H = sp.csr_array(L), sp.csr_array(H)
    # sparse sums drop explicit zeros, so rebuild both endpoints on the union pattern
    if r.size == 0:
        return sp.csr_array(L.shape, dtype=float), sp.csr_array(H.shape, dtype=float)
    lv = np.asarray(L[r, c], dtype=float).reshape(-1)
    hv = np.asarray(H[r, c], dtype=float).reshape(-1)
    L2 = sp.csr_array((lv, (r, c)), shape=L.shape)
    H2 = sp.csr_array((hv, (r, c)), shape=H.shape)
    L2.sort_indices()
    H2.sort_indices()
    return L2, H2


# -- set operations -----------------------------------------------------------

def intersect(a, b):
    """Componentwise intersection, or ``EMPTY`` if any component is disjoint."""
    if a.dim != b.dim:
        raise UsageError(f"dimension mismatch {a.dim} vs {b.dim}")
    lo = np.maximum(a.lo, b.lo)
    hi = np.minimum(a.hi, b.hi)
    if np.any(lo > hi):
        return EMPTY
    return IntervalVector(lo, hi, check=False)


def hausdorff(a, b):
    """Max endpoint displacement between two interval vectors."""
    return float(max(np.max(np.abs(a.lo - b.lo)), np.max(np.abs(a.hi - b.hi))))


# -- norms ------------------------------------------------------------------------

def inf_norm(v):
    return float(np.max(v.mag()))


def inf_norm_matrix(M):
    """Upper bound on max row sum of magnitudes."""
    mag = M.mag()
    n = M.shape[1]
    s = np.asarray(mag.sum(axis=1)).reshape(-1)
    s = s * (1.0 + rnd.gamma(n + 2))
    return float(rnd.up(float(np.max(s)))) if s.size else 0.0


# -- products -----------------------------------------------------------------

def _dot(P, Q):
    # P dense or sparse, Q dense or sparse; returns dense ndarray
    R = P @ Q
    if sp.issparse(R):
        R = R.toarray()
    return np.asarray(R)


def point_times_interval_matrix(C, M):
    """Enclosure of ``{C A : A in M}`` for a point matrix ``C``; returns dense."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[1] != M.shape[0]:
        raise UsageError(f"cannot multiply {C.shape} by {M.shape}")
    Cp = np.maximum(C, 0.0)
    Cn = np.minimum(C, 0.0)
    if M.is_thin():
        mid = _dot(C, M.lo)
        absb = _dot(np.abs(C), abs(M.lo) if M.is_sparse else np.abs(M.lo))
        lo, hi = _widen(mid, mid, absb, M.shape[0])
        return IntervalMatrix(lo, hi, check=False)
    lo = _dot(Cp, M.lo) + _dot(Cn, M.hi)
    hi = _dot(Cp, M.hi) + _dot(Cn, M.lo)
    absb = _dot(np.abs(C), M.mag())
    lo, hi = _widen(lo, hi, absb, 2 * M.shape[0])
    return IntervalMatrix(lo, hi, check=False)


def point_times_interval_vector(C, v):
    """Enclosure of ``{C x : x in v}``."""
    C = np.asarray(C, dtype=float) if not sp.issparse(C) else C
    if C.shape[1] != v.dim:
        raise UsageError(f"cannot multiply {C.shape} by vector of dim {v.dim}")
    if sp.issparse(C):
        Cp, Cn = C.maximum(0.0), C.minimum(0.0)
        absC = abs(C)
    else:
        Cp, Cn = np.maximum(C, 0.0), np.minimum(C, 0.0)
        absC = np.abs(C)
    lo = np.asarray(Cp @ v.lo + Cn @ v.hi).reshape(-1)
    hi = np.asarray(Cp @ v.hi + Cn @ v.lo).reshape(-1)
    absb = np.asarray(absC @ v.mag()).reshape(-1)
    lo, hi = _widen(lo, hi, absb, 2 * v.dim)
    return IntervalVector(lo, hi, check=False)


def interval_times_point_vector(M, x):
    """Enclosure of ``{A x : A in M}`` for a point vector ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if M.shape[1] != x.size:
        raise UsageError(f"cannot multiply {M.shape} by vector of dim {x.size}")
    xp, xn = np.maximum(x, 0.0), np.minimum(x, 0.0)
    lo = np.asarray(M.lo @ xp + M.hi @ xn).reshape(-1)
    hi = np.asarray(M.hi @ xp + M.lo @ xn).reshape(-1)
    absb = np.asarray(M.mag() @ np.abs(x)).reshape(-1)
    lo, hi = _widen(lo, hi, absb, 2 * x.size)
    return IntervalVector(lo, hi, check=False)


def interval_matvec(M, v):
    """Enclosure of ``{A x : A in M, x in v}`` using inf-sup products per entry."""
    if M.shape[1] != v.dim:
        raise UsageError(f"cannot multiply {M.shape} by vector of dim {v.dim}")
    if M.is_sparse:
        return _sparse_interval_matvec(M, v)
    L, H = M.lo, M.hi
    a, b = v.lo[None, :], v.hi[None, :]
    p1, p2, p3, p4 = L * a, L * b, H * a, H * b
    plo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    phi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    lo = plo.sum(axis=1)
    hi = phi.sum(axis=1)
    absb = np.maximum(np.abs(plo), np.abs(phi)).sum(axis=1)
    lo, hi = _widen(lo, hi, absb, v.dim)
    return IntervalVector(lo, hi, check=False)


def _sparse_interval_matvec(M, v):
    L, H = M.lo, M.hi
    cols = L.indices
    a, b = v.lo[cols], v.hi[cols]
    p1, p2, p3, p4 = L.data * a, L.data * b, H.data * a, H.data * b
    plo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    phi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    shape = M.shape
    rowsum = lambda d: np.asarray(sp.csr_array((d, L.indices, L.indptr), shape=shape).sum(axis=1)).reshape(-1)
    lo = rowsum(plo)
    hi = rowsum(phi)
    absb = rowsum(np.maximum(np.abs(plo), np.abs(phi)))
    lo, hi = _widen(lo, hi, absb, v.dim)
    return IntervalVector(lo, hi, check=False)


def identity_minus(M):
    """Enclosure of ``I - M`` for a square dense interval matrix."""
    n = M.shape[0]
    if M.shape[1] != n:
        raise UsageError("identity_minus needs a square matrix")
    D = M.to_dense()
    eye = np.eye(n)
    lo = rnd.vadd_down(eye, -D.hi)
    hi = rnd.vadd_up(eye, -D.lo)
    return IntervalMatrix(lo, hi, check=False)
