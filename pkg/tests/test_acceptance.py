"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_system, record_criterion
from interval_dsse.cli import main as cli_main
from interval_dsse.errors import IseError
from interval_dsse.estimator import build_jacobian, solve_iterative_wls, solve_linear_wls
from interval_dsse.interval_core import Interval, IntervalMatrix, IntervalVector, add, interval_matvec, mul
from interval_dsse.ise import assemble, extract_states
from interval_dsse.measurements import build_weights, plan_rows, point_values
from interval_dsse.network import load_feeder
from interval_dsse.pipeline import CaseConfig, audit_dimensions, format_audit, load_case, prepare, run_case
from interval_dsse.solvers import (
    hull_oracle,
    ige_solve,
    iko_solve,
    initial_box,
    krawczyk_solve,
    mko_solve,
    precondition,
)
from interval_dsse.truth import ErrorSpec, Placements, solve_power_flow, synthesize_measurements


def Q(x):
    return Fraction(x)


# -- 1. interval soundness ----------------------------------------------------------

def _scalar_checks(rng, n):
    """Point-sample containment of +, -, *, / against exact rationals."""
    bad = 0
    ends = rng.normal(size=(n, 4)) * 10.0 ** rng.integers(-3, 4, size=(n, 1))
    s = rng.random((n, 2))
    ops = rng.integers(0, 4, size=n)
    for (a0, a1, b0, b1), (u, v), op in zip(ends, s, ops):
        a = Interval(min(a0, a1), max(a0, a1))
        b = Interval(min(b0, b1), max(b0, b1))
        x = min(max(a.lo + u * (a.hi - a.lo), a.lo), a.hi)
        y = min(max(b.lo + v * (b.hi - b.lo), b.lo), b.hi)
        if op == 0:
            r, q = a + b, Q(x) + Q(y)
        elif op == 1:
            r, q = a - b, Q(x) - Q(y)
        elif op == 2:
            r, q = a * b, Q(x) * Q(y)
        else:
            if b.lo <= 0.0 <= b.hi:
                b = Interval(b.magnitude() + 0.5, b.magnitude() + 0.5 + b.width())
                y = b.lo + v * (b.hi - b.lo)
            r, q = a / b, Q(x) / Q(y)
        bad += not (Q(r.lo) <= q <= Q(r.hi))
    return bad


def _two_prod(a, b):
    """Dekker's exact product: a*b == p + e for normal-range floats."""
    def split(v):
        c = 134217729.0 * v
        hi = c - (c - v)
        return hi, v - hi
    p = a * b
    ah, al = split(a)
    bh, bl = split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _matvec_checks(rng, trials, n):
    """Componentwise containment of sampled point products in interval_matvec.

    The exact dot product is compared with each bound through fsum of the
    exact product terms; fsum rounds correctly, so its sign is exact.
    """
    bad = 0
    for _ in range(trials):
        M = rng.normal(size=(n, n))
        R = rng.uniform(0, 0.5, size=(n, n)) * (rng.random((n, n)) < 0.5)
        c = rng.normal(size=n)
        r = rng.uniform(0, 0.5, size=n)
        Y = interval_matvec(IntervalMatrix(M - R, M + R), IntervalVector(c - r, c + r))
        a = np.clip(M - R + rng.random((n, n)) * 2 * R, M - R, M + R)
        x = np.clip(c - r + rng.random(n) * 2 * r, c - r, c + r)
        p, e = _two_prod(a, x[None, :])
        for i in range(n):
            terms = [*p[i].tolist(), *e[i].tolist()]
            bad += not (math.fsum(terms + [-Y.lo[i]]) >= 0.0 and math.fsum(terms + [-Y.hi[i]]) <= 0.0)
    return bad


def _isotonicity_checks(rng, n):
    bad = 0
    ends = rng.normal(size=(n, 6)) * 10.0 ** rng.integers(-3, 4, size=(n, 1))
    for e in ends:
        a = Interval(min(e[0], e[1]), max(e[0], e[1]))
        b = Interval(min(e[2], e[3]), max(e[2], e[3]))
        c = Interval(min(e[4], e[5]), max(e[4], e[5]))
        big = a.hull(b)
        for op in (add, mul):
            bad += not op(a, c).is_subset(op(big, c))
    return bad


def _subdistributivity_checks(rng, n):
    """Exact x(y + z) inside the computed xy + xz, plus the set law on a dyadic grid."""
    bad = 0
    for k in range(n):
        if k % 2:
            e = rng.integers(-2 ** 20, 2 ** 20, size=6) / 64.0
        else:
            e = rng.normal(size=6) * 10.0 ** rng.integers(-3, 4)
        x = Interval(min(e[0], e[1]), max(e[0], e[1]))
        y = Interval(min(e[2], e[3]), max(e[2], e[3]))
        z = Interval(min(e[4], e[5]), max(e[4], e[5]))
        rhs = x * y + x * z
        if k % 2:
            bad += not (x * (y + z)).is_subset(rhs)
        else:
            s = (Q(y.lo) + Q(z.lo), Q(y.hi) + Q(z.hi))
            ps = [Q(p) * t for p in (x.lo, x.hi) for t in s]
            bad += not (Q(rhs.lo) <= min(ps) and max(ps) <= Q(rhs.hi))
    return bad


def test_criterion_1_interval_soundness():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    bad_pts = _scalar_checks(rng, 60_000) + _matvec_checks(rng, 5_000, 8)
    bad_iso = _isotonicity_checks(rng, 50_000)
    bad_sub = _subdistributivity_checks(rng, 10_000)
    dt = time.perf_counter() - t0
    ok = bad_pts == 0 and bad_iso == 0 and bad_sub == 0 and dt < 10.0
    record_criterion(1, ok, f"containment violations {bad_pts}/100000, isotonicity {bad_iso}/100000, "
                            f"sub-distributivity {bad_sub}/10000, {dt:.1f} s")
    assert ok


# -- 2 and 3. random interval systems -------------------------------------------------

@pytest.fixture(scope="module")
def systems():
    rng = np.random.default_rng(2024)
    out = []
    while len(out) < 200:
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, 21))
        A, B = random_system(rng, n=n, k=k)
        D = A.to_dense()
        if int(np.sum(D.lo != D.hi)) + int(np.sum(B.lo != B.hi)) <= 20:
            out.append((A, B))
    return out


def test_criterion_2_hull_containment(systems):
    t0 = time.perf_counter()
    viol = {"mko": 0, "krawczyk": 0, "iko": 0, "ige": 0}
    errors = {m: 0 for m in viol}
    for A, B in systems:
        hull = hull_oracle(A, B)
        for m, fn in (("mko", lambda: mko_solve(A, B).solution),
                      ("krawczyk", lambda: krawczyk_solve(A, B).solution),
                      ("iko", lambda: iko_solve(A, B).solution),
                      ("ige", lambda: ige_solve(A, B))):
            try:
                X = fn()
            except IseError:
                errors[m] += 1
                continue
            viol[m] += not hull.is_subset(X, slack=1e-9)
    dt = time.perf_counter() - t0
    ok = not any(viol.values()) and not any(errors.values()) and dt < 60.0
    record_criterion(2, ok, f"200 systems, violations {viol}, solver errors {errors}, {dt:.1f} s")
    assert ok


def test_criterion_3_tightness_ordering(systems):
    slack = 1e-12
    counts = {"mko<=krawczyk": 0, "krawczyk<=box": 0, "mko<=iko": 0}
    for A, B in systems:
        X0 = initial_box(precondition(A), A, B)
        mko = mko_solve(A, B, eps=0.0).solution.width()
        kr = krawczyk_solve(A, B, eps=0.0, X0=X0).solution.width()
        iko = iko_solve(A, B, eps=0.0).solution.width()
        counts["mko<=krawczyk"] += bool(np.any(mko > kr + slack))
        counts["krawczyk<=box"] += bool(np.any(kr > X0.width() + slack))
        counts["mko<=iko"] += bool(np.any(mko > iko + slack))
    ok = not any(counts.values())
    record_criterion(3, ok, f"systems violating each ordering (of 200, slack 1e-12): {counts}")
    assert ok


# -- 4. thin-system equivalence ---------------------------------------------------------

def _random_feeder(rng):
    nb = int(rng.integers(3, 8))
    buses = [{"id": "1", "phases": "ABC"}]
    branches = []
    phases_of = {"1": "ABC"}
    for i in range(2, nb + 1):
        parent = str(int(rng.integers(1, i)))
        pp = phases_of[parent]
        ph = pp if rng.random() < 0.6 or len(pp) == 1 else pp[int(rng.integers(0, len(pp)))]
        phases_of[str(i)] = ph
        load = {p: [float(rng.uniform(5, 60)), float(rng.uniform(2, 30))] for p in ph}
        buses.append({"id": str(i), "phases": ph, "load": load})
        k = len(ph)
        r = np.full((k, k), 0.004) + np.eye(k) * rng.uniform(0.01, 0.03)
        x = np.full((k, k), 0.008) + np.eye(k) * rng.uniform(0.02, 0.06)
        branches.append({"id": f"{parent}-{i}", "from": parent, "to": str(i), "phases": ph,
                         "r": r.tolist(), "x": x.tolist()})
    return load_feeder({"name": "rand", "base_kV": 4.16, "base_MVA": 3.0, "slack": "1",
                        "impedance_units": "pu", "buses": buses, "branches": branches})


def test_criterion_4_thin_system_equivalence():
    rng = np.random.default_rng(4)
    worst_rel, worst_pf = 0.0, 0.0
    for k in range(50):
        f = _random_feeder(rng)
        t = solve_power_flow(f, v_slack=1.0)
        kids = f.child_branches(f.slack)
        pl = Placements((f.slack, f.buses[-1].id), (kids[0].id,))
        ms = synthesize_measurements(t, pl, seed=k)
        plan = plan_rows(ms)
        js = build_jacobian(f, plan)
        z = point_values(plan, v_ref=ms.v_ref)
        w = build_weights(plan).diag
        s = assemble("I", js.H_mid, IntervalVector(z), None, w)
        x_mko = extract_states(mko_solve(s.A, s.B).solution, s).mid()
        x_wls = solve_linear_wls(js.H_mid, z, w).x
        worst_rel = max(worst_rel, np.linalg.norm(x_mko - x_wls, np.inf) / np.linalg.norm(x_wls, np.inf))

        ms0 = synthesize_measurements(t, pl, ErrorSpec.zero(), seed=k)
        plan0 = plan_rows(ms0, sigma_required=False)
        sig = np.array([max(v, 1e-5) for r in plan0.z1_rows for v in r.sigma])
        res = solve_iterative_wls(build_jacobian(f, plan0), ms0, w=1.0 / sig ** 2)
        worst_pf = max(worst_pf, np.max(np.abs(res.x - t.state_vector(js.index))))
    ok = worst_rel < 1e-6 and worst_pf < 1e-6
    record_criterion(4, ok, f"50 feeders, MKO vs linear WLS max rel {worst_rel:.2e}, "
                            f"zero-noise iterative WLS vs truth {worst_pf:.2e} p.u.")
    assert ok


# -- 5 and 6. 13-bus end to end -----------------------------------------------------------

@pytest.fixture(scope="module")
def case13():
    t0 = time.perf_counter()
    res = run_case(load_case("ieee13_case1"))
    return res, time.perf_counter() - t0


def test_criterion_5_ieee13_end_to_end(case13):
    res, dt = case13
    rep = next(r for r in res.reports if r.method == "MKO")
    ok = (rep.contains_truth and rep.contains_mc is True and 0.005 <= rep.q1 <= 0.06
          and 0.005 <= rep.q2 <= 0.06 and dt < 300.0)
    record_criterion(5, ok, f"truth contained {rep.contains_truth}, MC(1000) contained {rep.contains_mc}, "
                            f"Q1 {rep.q1:.4f}, Q2 {rep.q2:.4f}, {dt:.1f} s")
    assert ok


def test_criterion_6_line_uncertainty_monotonicity(case13):
    base, _ = case13
    cfg = load_case("ieee13_case2")
    assert cfg.seed == base.prepared.cfg.seed and cfg.line_uncertainty == 0.05
    wide = run_case(cfg)
    x0 = base.solutions["mko"][1]
    x1 = wide.solutions["mko"][1]
    shrunk = int(np.sum(x1.width() < x0.width() - 1e-12))
    rep = next(r for r in wide.reports if r.method == "MKO")
    ok = shrunk == 0 and rep.contains_truth and rep.contains_mc is True
    record_criterion(6, ok, f"state intervals shrunk {shrunk}/{x0.dim}, truth contained "
                            f"{rep.contains_truth}, MC(1000) contained {rep.contains_mc}")
    assert ok


# -- 7. robustness to DG truths at interval endpoints -------------------------------------

def test_criterion_7_robustness():
    centered = load_case("case2")
    centered = CaseConfig(**{**centered.__dict__, "trials": 0, "solvers": ("mko",)})
    q_ref = next(r for r in run_case(centered).reports if r.method == "MKO").q2
    parts, ok = [], True
    for name in ("case3", "case4", "case5"):
        cfg = load_case(name)
        cfg = CaseConfig(**{**cfg.__dict__, "solvers": ("mko",)})
        rep = next(r for r in run_case(cfg).reports if r.method == "MKO")
        ratio = rep.q2 / q_ref
        ok &= rep.contains_truth and 0.5 < ratio < 2.0
        parts.append(f"{name}: contained {rep.contains_truth}, Q2 ratio {ratio:.2f}")
    record_criterion(7, ok, f"centered Q2 {q_ref:.4f}; " + "; ".join(parts))
    assert ok


# -- 8. performance pattern -----------------------------------------------------------------

def test_criterion_8_performance():
    from interval_dsse.analysis import mc_envelope

    cfg = load_case("case1")
    p = prepare(cfg)
    t0 = time.perf_counter()
    mko = mko_solve(p.system.A, p.system.B, eps=cfg.eps)
    t_mko = time.perf_counter() - t0
    iko = iko_solve(p.system.A, p.system.B, eps=cfg.eps)
    t0 = time.perf_counter()
    mc_envelope(p.truth, 1000, seed=cfg.seed, placements=p.placements, spec=p.spec,
                truncate=cfg.truncate)
    t_mc = time.perf_counter() - t0
    speedup = t_mc / t_mko
    ok = speedup >= 50.0 and mko.iterations <= iko.iterations
    record_criterion(8, ok, f"MKO {t_mko:.2f} s vs MC(1000) {t_mc:.1f} s (speedup {speedup:.0f}x), "
                            f"iterations MKO {mko.iterations} vs IKO {iko.iterations}")
    assert ok


# -- 9. dimension audit ----------------------------------------------------------------------

def test_criterion_9_dimension_audit(capsys):
    a = audit_dimensions(load_case("case1"))
    assert cli_main(["audit", "case1"]) == 0
    text = capsys.readouterr().out
    tp, bal = a["modes"]["all-three-phase"], a["modes"]["balanced"]
    third = {k: bal[k] / tp[k] for k in ("n", "m", "m_plus_n")}
    exact_n = tp["n"] == 714
    explained = tp["m"] != 888 and any("m differs" in n for n in a["notes"])
    ok = (exact_n and (tp["m"] == 888 or explained) and bal["n"] == 238
          and all(0.28 <= v <= 0.38 for v in third.values())
          and "714/888/1602" in text and "238/296/534" in text and text == format_audit(a) + "\n")
    record_criterion(9, ok, f"three-phase n/m/m+n {tp['n']}/{tp['m']}/{tp['m_plus_n']} vs 714/888/1602 "
                            f"(m delta explained {explained}); balanced {bal['n']}/{bal['m']}/"
                            f"{bal['m_plus_n']}, ratios " + ", ".join(f"{k} {v:.3f}" for k, v in third.items()))
    assert ok


# -- 10. model-variant degeneration -------------------------------------------------------------

def _identical(a, b):
    return ((a.A.lo != b.A.lo).nnz == 0 and (a.A.hi != b.A.hi).nnz == 0
            and np.array_equal(a.B.lo, b.B.lo) and np.array_equal(a.B.hi, b.B.hi)
            and a.A.lo.shape == b.A.lo.shape)


def test_criterion_10_model_degeneration():
    from interval_dsse.network import load_bundled

    all_dg = tuple(u.id for u in load_bundled("ieee13").dg)
    base = dict(name="c10", feeder="ieee13", v_slack=1.05, seed=2024, truncate=True)
    iv_metered = prepare(CaseConfig(model="IV", metered_dg=all_dg, line_uncertainty=0.05, **base)).system
    iii = prepare(CaseConfig(model="III", metered_dg=all_dg, line_uncertainty=0.05, **base)).system
    iv_thin = prepare(CaseConfig(model="IV", **base)).system
    ii = prepare(CaseConfig(model="II", **base)).system
    a = _identical(iv_metered, iii) and iv_metered.m2 == 0
    b = _identical(iv_thin, ii) and ii.m2 > 0
    ok = a and b
    record_criterion(10, ok, f"IV(all DG metered) == III: {a}; IV(f = 0) == II: {b} (13-bus)")
    assert ok
