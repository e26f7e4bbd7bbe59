import numpy as np
import pytest

from interval_dsse.interval_core import IntervalMatrix, IntervalVector
from interval_dsse.solvers import beta_of


def random_system(rng, n=None, k=None, rad=0.05, beta_max=0.9):
    """Random square interval system with at most 20 interval entries and beta < beta_max.

    The midpoint is diagonally dominant so every vertex system is nonsingular.
    ``k`` interval entries are spread over A and B.
    """
    while True:
        n = n or int(rng.integers(2, 6))
        k_tot = k if k is not None else int(rng.integers(1, 13))
        M = rng.normal(size=(n, n))
        M += np.diag(np.sign(np.diag(M)) * (np.abs(M).sum(axis=1) + 0.5))
        b = rng.normal(size=n) * 2.0
        slots = [("A", i, j) for i in range(n) for j in range(n)] + [("B", i, 0) for i in range(n)]
        pick = rng.choice(len(slots), size=min(k_tot, len(slots), 20), replace=False)
        Ar = np.zeros((n, n))
        Br = np.zeros(n)
        for p in pick:
            kind, i, j = slots[p]
            if kind == "A":
                Ar[i, j] = rad * abs(M[i, j]) * rng.uniform(0.2, 1.0) + 1e-3
            else:
                Br[i] = rad * (abs(b[i]) + 0.1) * rng.uniform(0.2, 1.0)
        A = IntervalMatrix(M - Ar, M + Ar)
        B = IntervalVector(b - Br, b + Br)
        if beta_of(A) < beta_max:
            return A, B


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = {}


def record_criterion(k, ok, detail):
    line = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[k] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
