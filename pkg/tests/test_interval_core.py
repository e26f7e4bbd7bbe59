from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from interval_dsse.errors import DomainError, UsageError
from interval_dsse.interval_core import (
    EMPTY,
    Interval,
    IntervalMatrix,
    IntervalVector,
    add,
    hausdorff,
    identity_minus,
    inf_norm,
    inf_norm_matrix,
    intersect,
    intersect_scalar,
    interval_matvec,
    interval_times_point_vector,
    mul,
    point_times_interval_matrix,
    point_times_interval_vector,
)
from interval_dsse.interval_core import rounding as rnd

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@st.composite
def intervals(draw):
    a, b = draw(finite), draw(finite)
    return Interval(min(a, b), max(a, b))


def exact(x):
    return Fraction(x)


def contains_exact(iv, q):
    return exact(iv.lo) <= q <= exact(iv.hi)


# -- scalar examples ---------------------------------------------------------------

def test_add_examples():
    assert Interval(1, 2) + Interval(3, 4) == Interval(4, 6)
    assert Interval(0) + Interval(-2.5, 7) == Interval(-2.5, 7)
    s = Interval(0.1) + Interval(0.2)
    assert s.lo < s.hi
    assert contains_exact(s, exact(0.1) + exact(0.2))
    assert s.lo <= 0.3 <= s.hi


def test_mul_examples():
    assert Interval(-1, 2) * Interval(3, 4) == Interval(-4, 8)
    assert Interval(0) * Interval(-5, 9) == Interval(0)
    assert Interval(2, 3) * Interval(-1, 1) == Interval(-3, 3)


def test_set_operations():
    assert intersect_scalar(Interval(1, 3), Interval(2, 5)) == Interval(2, 3)
    assert intersect_scalar(Interval(1, 2), Interval(3, 4)) is EMPTY
    m = Interval(-1, 3)
    assert m.midpoint() == 1 and m.radius() == 2 and m.width() == 4
    assert Interval(-2, 1).magnitude() == 2
    assert Interval(1, 2).is_subset(Interval(0, 3))
    assert Interval(0.5, 1).contains_point(0.75)


def test_division_by_zero_interval():
    with pytest.raises(DomainError):
        Interval(1, 2) / Interval(-1, 1)
    q = Interval(1) / Interval(3)
    assert contains_exact(q, Fraction(1, 3)) and q.lo < q.hi


def test_constructor_rejects_bad_endpoints():
    with pytest.raises(UsageError):
        Interval(2, 1)
    with pytest.raises(DomainError):
        Interval(0, float("inf"))
    with pytest.raises(DomainError):
        Interval(float("nan"))


def test_exact_operations_stay_thin():
    assert (Interval(1.5) + Interval(2.25)).is_thin
    assert (Interval(3.0) * Interval(0.5)).is_thin


# -- rounding primitives ----------------------------------------------------------

@given(finite, finite)
def test_rounding_brackets_exact_sum_and_product(a, b):
    lo, hi = rnd.add_bounds(a, b)
    assert exact(lo) <= exact(a) + exact(b) <= exact(hi)
    lo, hi = rnd.mul_bounds(a, b)
    assert exact(lo) <= exact(a) * exact(b) <= exact(hi)


@given(finite, finite.filter(lambda v: abs(v) > 1e-300))
def test_rounding_brackets_exact_quotient(a, b):
    lo, hi = rnd.div_bounds(a, b)
    assert exact(lo) <= exact(a) / exact(b) <= exact(hi)


# -- hypothesis properties ------------------------------------------------------------

@settings(max_examples=300)
@given(intervals(), intervals(), st.floats(0, 1), st.floats(0, 1))
def test_point_containment(a, b, s, t):
    x = a.lo + s * (a.hi - a.lo)
    y = b.lo + t * (b.hi - b.lo)
    x = min(max(x, a.lo), a.hi)
    y = min(max(y, b.lo), b.hi)
    qx, qy = exact(x), exact(y)
    assert contains_exact(a + b, qx + qy)
    assert contains_exact(a - b, qx - qy)
    assert contains_exact(a * b, qx * qy)
    if b.mignitude() > 1e-6:
        assert contains_exact(a / b, qx / qy)


@settings(max_examples=300)
@given(intervals(), intervals(), intervals())
def test_inclusion_isotonicity(a, b, c):
    big = a.hull(b)
    for op in (add, mul):
        assert op(a, c).is_subset(op(big, c))


@settings(max_examples=300)
@given(intervals(), intervals(), intervals())
def test_subdistributivity_against_exact_left_side(x, y, z):
    # exact x*(y+z) always lies inside the computed x*y + x*z
    s = (exact(y.lo) + exact(z.lo), exact(y.hi) + exact(z.hi))
    ps = [exact(p) * q for p in (x.lo, x.hi) for q in s]
    rhs = x * y + x * z
    assert exact(rhs.lo) <= min(ps) and max(ps) <= exact(rhs.hi)


grid = st.integers(-2 ** 20, 2 ** 20).map(lambda k: k / 64.0)


@st.composite
def grid_intervals(draw):
    a, b = draw(grid), draw(grid)
    return Interval(min(a, b), max(a, b))


@settings(max_examples=300)
@given(grid_intervals(), grid_intervals(), grid_intervals())
def test_subdistributivity_bitwise_when_exact(x, y, z):
    # dyadic endpoints keep every operation exact, so the set law holds bit for bit
    assert (x * (y + z)).is_subset(x * y + x * z)


def test_subdistributivity_is_not_bitwise_in_floating_point():
    # both sides are valid enclosures, but rounding can put either one outside the other
    x, y, z = Interval(0.0, 1.5), Interval(0.0, 1.0), Interval(0.0, 0.99999)
    lhs, rhs = x * (y + z), x * y + x * z
    assert not lhs.is_subset(rhs)
    assert exact(rhs.hi) >= exact(1.5) * (exact(1.0) + exact(0.99999))


# -- vectors and matrices -------------------------------------------------------

def test_inf_norms():
    v = IntervalVector([-2, 0], [1, 3])
    assert inf_norm(v) == 3
    assert inf_norm(IntervalVector([1.0, -4.0])) == 4
    assert inf_norm_matrix(IntervalMatrix.identity(4)) >= 1.0
    assert inf_norm_matrix(IntervalMatrix.identity(4)) <= 1.0 + 1e-14


def test_vector_intersection_and_hausdorff():
    a = IntervalVector([0, 0], [2, 2])
    b = IntervalVector([1, 3], [3, 4])
    assert intersect(a, b) is EMPTY
    c = IntervalVector([1, 1], [3, 3])
    assert intersect(a, c) == IntervalVector([1, 1], [2, 2])
    assert hausdorff(a, c) == 1.0


def test_dimension_mismatch():
    with pytest.raises(UsageError):
        interval_matvec(IntervalMatrix.identity(2), IntervalVector([1, 2, 3]))
    with pytest.raises(UsageError):
        point_times_interval_matrix(np.eye(3), IntervalMatrix.identity(2))


def _random_interval_matrix(rng, n, k, sparse):
    mid = rng.normal(size=(n, k))
    rad = np.abs(rng.normal(size=(n, k))) * 0.1 * (rng.random((n, k)) < 0.5)
    lo, hi = mid - rad, mid + rad
    if sparse:
        mask = rng.random((n, k)) < 0.6
        lo, hi = lo * mask, hi * mask
        return IntervalMatrix(sp.csr_array(lo), sp.csr_array(hi))
    return IntervalMatrix(lo, hi)


@pytest.mark.parametrize("sparse", [False, True])
def test_products_contain_sampled_points(sparse):
    rng = np.random.default_rng(4)
    for _ in range(20):
        n, k = rng.integers(1, 7, size=2)
        M = _random_interval_matrix(rng, n, k, sparse)
        v = IntervalVector.from_midrad(rng.normal(size=k), np.abs(rng.normal(size=k)) * 0.2)
        C = rng.normal(size=(3, n))
        x = rng.normal(size=k)
        Mv = interval_matvec(M, v)
        CM = point_times_interval_matrix(C, M)
        Mx = interval_times_point_vector(M, x)
        P = rng.normal(size=(2, k))
        Pv = point_times_interval_vector(P, v)
        D = M.to_dense()
        for _ in range(50):
            A = D.lo + rng.random(D.shape) * (D.hi - D.lo)
            y = v.lo + rng.random(k) * (v.hi - v.lo)
            assert Mv.contains(A @ y)
            assert CM.contains(C @ A)
            assert Mx.contains(A @ x)
            assert Pv.contains(P @ y)


def test_sparse_and_dense_products_agree():
    rng = np.random.default_rng(9)
    M = _random_interval_matrix(rng, 5, 5, True)
    v = IntervalVector.from_midrad(rng.normal(size=5), np.full(5, 0.1))
    a = interval_matvec(M, v)
    b = interval_matvec(M.to_dense(), v)
    assert np.allclose(a.lo, b.lo, atol=1e-14) and np.allclose(a.hi, b.hi, atol=1e-14)


def test_identity_minus_encloses():
    M = IntervalMatrix([[0.1, 0.2], [0.0, 0.5]], [[0.2, 0.2], [0.1, 0.5]])
    R = identity_minus(M)
    assert R.contains(np.eye(2) - M.lo) and R.contains(np.eye(2) - M.hi)


def test_from_triplets_rejects_duplicates():
    with pytest.raises(UsageError):
        IntervalMatrix.from_triplets([0, 0], [1, 1], [1.0, 2.0], [1.0, 2.0], (2, 2))


def test_vectors_are_immutable():
    v = IntervalVector([1.0, 2.0])
    with pytest.raises(AttributeError):
        v.lo = np.zeros(2)
    with pytest.raises(ValueError):
        v.lo[0] = 5.0
