import numpy as np
import pytest

from conftest import random_system
from interval_dsse.errors import (
    EliminationBreakdownError,
    InconsistencyError,
    OracleLimitError,
    PreconditioningError,
    StructuralDeficiencyError,
    UsageError,
)
from interval_dsse.interval_core import IntervalMatrix, IntervalVector
from interval_dsse.solvers import (
    hull_oracle,
    ige_solve,
    iko_solve,
    initial_box,
    krawczyk_solve,
    mko_solve,
    precondition,
    solve,
)


# -- preconditioning ----------------------------------------------------------------

def test_precondition_examples():
    assert np.array_equal(precondition(IntervalMatrix(np.eye(3))), np.eye(3))
    # beta is an upper bound under outward rounding, so zero up to a few ulps
    assert mko_solve(IntervalMatrix(np.eye(3)), IntervalVector(np.ones(3))).beta < 1e-14
    C = precondition(IntervalMatrix(np.diag([2.0, 4.0])))
    assert np.allclose(C, np.diag([0.5, 0.25]), atol=0)
    with pytest.raises(PreconditioningError) as exc:
        precondition(IntervalMatrix([[0.0]], [[2.0]]))
    assert exc.value.beta >= 1.0
    with pytest.raises(StructuralDeficiencyError):
        precondition(IntervalMatrix(np.array([[1.0, 2.0], [2.0, 4.0]])))


def test_initial_box_examples(rng):
    b = np.array([3.0, -1.0, 2.0])
    X0 = initial_box(np.eye(3), IntervalMatrix(np.eye(3)), IntervalVector(b))
    assert np.allclose(X0.lo, -3.0, rtol=1e-14) and np.allclose(X0.hi, 3.0, rtol=1e-14)
    assert X0.contains(b)
    A = IntervalMatrix(np.diag([2.0, 2.0]))
    X0 = initial_box(precondition(A), A, IntervalVector([2.0, -2.0]))
    assert np.allclose(X0.hi, 1.0, rtol=1e-14) and X0.contains([1.0, -1.0])
    for _ in range(20):
        A, B = random_system(rng, n=3)
        X0 = initial_box(precondition(A), A, B)
        assert X0.contains(hull_oracle(A, B).lo) and X0.contains(hull_oracle(A, B).hi)


# -- MKO / Krawczyk -----------------------------------------------------------------

def test_identity_system_one_step():
    B = IntervalVector([0.0, 1.0], [1.0, 3.0])
    rep = mko_solve(IntervalMatrix(np.eye(2)), B)
    X = rep.solution
    assert B.is_subset(X)
    assert np.allclose(X.lo, B.lo, atol=1e-14) and np.allclose(X.hi, B.hi, atol=1e-14)
    assert rep.converged and rep.iterations <= 2


def test_thin_system_matches_dense_solve(rng):
    for _ in range(10):
        M = rng.normal(size=(4, 4)) + 5 * np.eye(4)
        b = rng.normal(size=4)
        x = np.linalg.solve(M, b)
        for fn in (mko_solve, krawczyk_solve):
            rep = fn(IntervalMatrix(M), IntervalVector(b))
            assert rep.solution.contains(x)
            assert np.max(rep.solution.width()) < 1e-12


def test_random_systems_enclose_vertices_and_samples(rng):
    for _ in range(10):
        A, B = random_system(rng, n=4, k=8)
        hull = hull_oracle(A, B)
        D = A.to_dense()
        pts = []
        for _ in range(1000):
            a = D.lo + rng.random(D.shape) * (D.hi - D.lo)
            b = B.lo + rng.random(B.dim) * (B.hi - B.lo)
            pts.append(np.linalg.solve(a, b))
        pts = np.array(pts)
        for fn in (mko_solve, krawczyk_solve, iko_solve):
            X = fn(A, B).solution
            assert hull.is_subset(X)
            assert np.all(X.lo <= pts.min(axis=0)) and np.all(pts.max(axis=0) <= X.hi)


def test_krawczyk_converges_from_box_and_fixed_point(rng):
    A, B = random_system(rng, n=3, k=6)
    X0 = initial_box(precondition(A), A, B)
    rep = krawczyk_solve(A, B, eps=0.0, X0=X0)
    again = krawczyk_solve(A, B, eps=0.0, X0=rep.solution)
    assert again.solution == rep.solution and again.iterations == 1


def test_iterates_are_nested(rng):
    import interval_dsse.solvers as S

    A, B = random_system(rng, n=4, k=10)
    seen = []
    orig = S.intersect

    def spy(a, b):
        r = orig(a, b)
        seen.append((r, b))
        return r

    S.intersect = spy
    try:
        mko_solve(A, B, eps=0.0)
        krawczyk_solve(A, B, eps=0.0)
    finally:
        S.intersect = orig
    assert seen
    for new, old in seen:
        assert new.is_subset(old)


def test_stopping_rule(rng):
    A, B = random_system(rng, n=4, k=10)
    for eps in (1e-4, 1e-8):
        rep = mko_solve(A, B, eps=eps)
        assert rep.converged and rep.history[-1] <= eps
        assert all(h > eps for h in rep.history[:-1])


def test_determinism(rng):
    A, B = random_system(rng, n=4, k=10)
    for method in ("mko", "krawczyk", "iko", "ige"):
        a, b = solve(method, A, B), solve(method, A, B)
        assert a.solution == b.solution
        assert (a.iterations, a.beta, a.alpha, a.history) == (b.iterations, b.beta, b.alpha, b.history) or method == "ige"


def test_inconsistent_start_box():
    A = IntervalMatrix(np.eye(2))
    B = IntervalVector([1.0, 1.0])
    with pytest.raises(InconsistencyError):
        krawczyk_solve(A, B, X0=IntervalVector([5.0, 5.0], [6.0, 6.0]))


def test_unknown_solver():
    with pytest.raises(UsageError):
        solve("lp", IntervalMatrix(np.eye(1)), IntervalVector([1.0]))


# -- IGE / IKO -----------------------------------------------------------------------

def test_ige_thin_and_diagonal():
    M = np.array([[4.0, 1.0], [2.0, 3.0]])
    b = np.array([1.0, 2.0])
    X = ige_solve(IntervalMatrix(M), IntervalVector(b))
    assert X.contains(np.linalg.solve(M, b)) and np.max(X.width()) < 1e-14
    A = IntervalMatrix(np.diag([2.0, 1.0]), np.diag([4.0, 2.0]))
    X = ige_solve(A, IntervalVector([4.0, 1.0], [8.0, 2.0]))
    assert X.lo[0] == 1.0 and X.hi[0] == 4.0 and X.lo[1] == 0.5 and X.hi[1] == 2.0


def test_ige_contains_hull(rng):
    for _ in range(10):
        A, B = random_system(rng, n=3, k=6)
        assert hull_oracle(A, B).is_subset(ige_solve(A, B))


def test_iko_and_mko_agree_on_thin_systems(rng):
    M = rng.normal(size=(3, 3)) + 4 * np.eye(3)
    b = rng.normal(size=3)
    x = np.linalg.solve(M, b)
    for fn in (mko_solve, iko_solve):
        X = fn(IntervalMatrix(M), IntervalVector(b)).solution
        assert X.contains(x) and np.max(X.width()) < 1e-12


def test_ige_breakdown_where_mko_succeeds():
    # the second pivot a22 - a21 a12 / a11 = [-1.75, 0.75] straddles zero, yet
    # beta = 2/3
    M = np.array([[1.0, -0.5, -3.0], [-1.0, 0.0, -0.5], [1.0, 1.0, 0.0]])
    R = np.zeros((3, 3))
    R[0, 1], R[1, 1] = 0.5, 0.75
    A = IntervalMatrix(M - R, M + R)
    B = IntervalVector(np.ones(3))
    with pytest.raises(EliminationBreakdownError):
        ige_solve(A, B)
    with pytest.raises(EliminationBreakdownError):
        iko_solve(A, B)
    rep = mko_solve(A, B)
    assert rep.beta < 1.0
    assert hull_oracle(A, B).is_subset(rep.solution)


# -- oracle --------------------------------------------------------------------------------

def test_oracle_examples():
    M = np.array([[3.0, 1.0], [1.0, 2.0]])
    b = np.array([1.0, 1.0])
    h = hull_oracle(IntervalMatrix(M), IntervalVector(b))
    assert np.allclose(h.lo, np.linalg.solve(M, b)) and h.is_thin()
    h = hull_oracle(IntervalMatrix([[2.0]], [[4.0]]), IntervalVector([4.0], [8.0]))
    assert h.lo[0] == 1.0 and h.hi[0] == 4.0


def test_oracle_limits():
    n = 5
    A = IntervalMatrix(np.eye(n) * 10 - 0.01, np.eye(n) * 10 + 0.01)
    with pytest.raises(OracleLimitError):
        hull_oracle(A, IntervalVector(np.ones(n)))
    with pytest.raises(StructuralDeficiencyError):
        hull_oracle(IntervalMatrix([[0.0]], [[1.0]]), IntervalVector([1.0]))
