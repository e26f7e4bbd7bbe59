"""Augmented interval WLS system ``[A][X] = [B]``.

The normal equations ``H'W H x = H'W z`` would multiply two interval
matrices. Introducing the residual ``y = H x - z`` avoids that product:

    [ H   -I  ] [x]   [z]
    [ 0  H'W  ] [y] = [0]

``H'W`` is a point-times-interval product (``W`` diagonal, positive).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, UsageError
from .interval_core import IntervalMatrix, IntervalVector
from .interval_core import rounding as rnd

VARIANTS = ("I", "II", "III", "IV")


def normalize_variant(v):
    s = str(v).upper().replace("MODEL", "").replace("_", "").strip()
    if s not in VARIANTS:
        raise UsageError(f"unknown model variant {v!r}; expected one of {VARIANTS}")
    return s


@dataclass(frozen=True)
class IseSystem:
    A: IntervalMatrix
    B: IntervalVector
    variant: str
    n: int
    m1: int
    m2: int

    @property
    def m(self):
        return self.m1 + self.m2

    @property
    def size(self):
        return self.n + self.m

    def state_slice(self):
        return slice(0, self.n)


def _scale_columns(M, w):
    """Enclosure of ``M diag(w)`` for positive ``w`` (CSR in, CSR out)."""
    lo = M.lo.tocsc().copy()
    hi = M.hi.tocsc().copy()
    cols = np.repeat(np.arange(lo.shape[1]), np.diff(lo.indptr))
    lo.data = rnd.vmul_down(lo.data, w[cols])
    hi.data = rnd.vmul_up(hi.data, w[cols])
    return IntervalMatrix(sp.csr_array(lo), sp.csr_array(hi), check=False)


def assemble(variant, J, z1, z2, W):
    """Build the augmented system from the Jacobian, measurements and weights.

    ``J`` is a :class:`~interval_dsse.estimator.JacobianSystem` (or an
    :class:`IntervalMatrix` H), ``z2`` may be ``None``, ``W`` is a
    :class:`~interval_dsse.measurements.WeightMatrix` or a 1-D array of
    diagonal weights covering z1 then z2.

    Variant constraints: Models I and II need a thin ``H``; Models I and III
    take no ``z2``. Model IV accepts any combination, so it degenerates to
    the others exactly when its inputs do.
    """
    variant = normalize_variant(variant)
    H = J.H if hasattr(J, "H") else J
    if not isinstance(H, IntervalMatrix):
        H = IntervalMatrix(sp.csr_array(H))
    H = H.to_sparse()
    m, n = H.shape
    m1 = z1.dim
    m2 = 0 if z2 is None else z2.dim
    if m1 + m2 != m:
        raise UsageError(f"H has {m} rows but z1, z2 give {m1} + {m2}")
    w = np.asarray(W.diag if hasattr(W, "diag") else W, dtype=float).reshape(-1)
    if w.size != m:
        raise UsageError(f"weights have {w.size} entries, expected {m}")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ConfigurationError("weights must be positive and finite")
    if variant in ("I", "II") and not H.is_thin():
        raise ConfigurationError(f"Model {variant} requires point line parameters")
    if variant in ("I", "III") and m2:
        raise ConfigurationError(f"Model {variant} has no DG interval rows")

    z = z1 if z2 is None else z1.concat(z2)
    HtW = _scale_columns(H.T.to_sparse(), w)
    eye = sp.identity(m, format="csr")
    L = sp.block_array([[H.lo, -eye], [None, HtW.lo]], format="csr")
    U = sp.block_array([[H.hi, -eye], [None, HtW.hi]], format="csr")
    A = IntervalMatrix(L, U, check=False)
    B = IntervalVector(np.concatenate([z.lo, np.zeros(n)]), np.concatenate([z.hi, np.zeros(n)]),
                       check=False)
    return IseSystem(A, B, variant, n, m1, m2)


def extract_states(sol, sys):
    """Physical-state part ``[x]`` of a solution of ``sys``."""
    if sol.dim != sys.size:
        raise UsageError(f"solution has dim {sol.dim}, system has {sys.size}")
    return IntervalVector(sol.lo[: sys.n], sol.hi[: sys.n], check=False)


def dump_triplets(sys, path):
    """Write A and B as text: ``A i j lo hi`` lines then ``B i lo hi`` lines."""
    L = sp.csr_array(sys.A.lo)
    U = sp.csr_array(sys.A.hi)
    # union pattern: an entry like [0, h] is stored only in U
    P = sp.coo_array(abs(L) + abs(U))
    order = np.lexsort((P.col, P.row))
    with open(path, "w") as fh:
        fh.write(f"# variant {sys.variant} n {sys.n} m1 {sys.m1} m2 {sys.m2}\n")
        for i, j in zip(P.row[order], P.col[order]):
            fh.write(f"A {i} {j} {float(L[i, j])!r} {float(U[i, j])!r}\n")
        for i, (lo, hi) in enumerate(zip(sys.B.lo, sys.B.hi)):
            fh.write(f"B {i} {float(lo)!r} {float(hi)!r}\n")


def load_triplets(path):
    rows, cols, lo, hi, blo, bhi = [], [], [], [], [], []
    meta = {}
    with open(path) as fh:
        for line in fh:
            t = line.split()
            if not t:
                continue
            if t[0] == "#":
                meta = dict(zip(t[1::2], t[2::2]))
            elif t[0] == "A":
                rows.append(int(t[1]))
                cols.append(int(t[2]))
                lo.append(float(t[3]))
                hi.append(float(t[4]))
            elif t[0] == "B":
                blo.append(float(t[2]))
                bhi.append(float(t[3]))
    N = len(blo)
    A = IntervalMatrix.from_triplets(rows, cols, lo, hi, (N, N))
    B = IntervalVector(blo, bhi)
    return IseSystem(A, B, meta.get("variant", "IV"), int(meta.get("n", 0)),
                     int(meta.get("m1", 0)), int(meta.get("m2", 0)))
