"""Enclose the solution set of a 3x3 interval system with every solver and
compare against the vertex hull."""

import numpy as np

from interval_dsse.interval_core import IntervalMatrix, IntervalVector
from interval_dsse.solvers import hull_oracle, ige_solve, solve

M = np.array([[4.0, 1.0, 0.5],
              [1.0, 5.0, 1.0],
              [0.5, 1.0, 3.0]])
R = np.array([[0.1, 0.05, 0.0],
              [0.05, 0.1, 0.0],
              [0.0, 0.0, 0.2]])
A = IntervalMatrix(M - R, M + R)
B = IntervalVector([0.9, 1.8, 2.7], [1.1, 2.2, 3.3])

hull = hull_oracle(A, B)
print("vertex hull")
for i, (lo, hi) in enumerate(zip(hull.lo, hull.hi)):
    print(f"  x[{i}] in [{lo:.6f}, {hi:.6f}]")

for method in ("mko", "krawczyk", "iko"):
    rep = solve(method, A, B, eps=1e-10)
    X = rep.solution
    print(f"{rep.method:>9}: iterations {rep.iterations}, beta {rep.beta:.3f}, "
          f"widths {np.array2string(X.width(), precision=5)}, encloses hull {hull.is_subset(X)}")

X = ige_solve(A, B)
print(f"{'IGE':>9}: widths {np.array2string(X.width(), precision=5)}, encloses hull {hull.is_subset(X)}")
