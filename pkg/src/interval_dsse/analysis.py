"""Monte Carlo envelopes, accuracy indices and method comparison tables."""

import csv
import io
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, UnobservableError, UsageError
from .estimator import StateIndex, bus_voltages, build_jacobian, solve_iterative_wls
from .interval_core import IntervalVector
from .measurements import build_weights, plan_rows
from .network import sample_line_parameters
from .truth import synthesize_measurements


@dataclass
class McEnvelope:
    """Componentwise min/max of estimated states and |V| over MC trials."""

    x_min: np.ndarray
    x_max: np.ndarray
    v_min: dict  # (bus, phase) -> float
    v_max: dict
    trials: int
    failed: int
    seed: int
    trial_times: list = field(default_factory=list)

    @property
    def states(self):
        return IntervalVector(self.x_min, self.x_max)

    @property
    def total_time(self):
        return float(sum(self.trial_times))


def mc_envelope(truth, trials, seed=0, placements=None, spec=None, line_fraction=0.0,
                estimator_feeder=None, truncate=True, sample_dg=True):
    """Envelope of iterative-WLS estimates over ``trials`` randomized runs.

    Each trial draws fresh measurement noise from the fixed ``truth``, a
    uniform point output for every unmetered DG unit inside its interval,
    and (when ``line_fraction > 0``) uniform line parameters within
    ``+-line_fraction`` of nominal for the estimator model. Trials whose
    estimator fails are counted in ``failed`` and left out.
    """
    if trials <= 0:
        raise UsageError("MC needs trials >= 1")
    f = estimator_feeder or truth.feeder
    index = StateIndex(f)
    x_min = np.full(index.n, np.inf)
    x_max = np.full(index.n, -np.inf)
    v_min, v_max = {}, {}
    failed = 0
    times = []
    js_fixed = None
    for k in range(trials):
        t0 = time.perf_counter()
        rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, 7, k]))
        dg = {}
        if sample_dg:
            for u in f.dg:
                if not u.metered:
                    dg[u.id] = float(rng.uniform(u.p_kw.lo, u.p_kw.hi))
        ms = synthesize_measurements(truth, placements, spec, seed=seed, truncate=truncate,
                                     stream=(1, k), dg_override=dg)
        plan = plan_rows(ms)
        if line_fraction > 0.0:
            fk = sample_line_parameters(f, line_fraction, rng)
            js = build_jacobian(fk, plan, StateIndex(fk))
        else:
            fk = f
            if js_fixed is None:
                js_fixed = build_jacobian(f, plan, index)
            js = js_fixed
            js.plan = plan
        try:
            res = solve_iterative_wls(js, ms, w=build_weights(plan).diag)
        except (DivergenceError, UnobservableError):
            failed += 1
            times.append(time.perf_counter() - t0)
            continue
        x = res.x
        np.minimum(x_min, x, out=x_min)
        np.maximum(x_max, x, out=x_max)
        for key, v in bus_voltages(js.index, x, fk).items():
            m = abs(v)
            if key not in v_min or m < v_min[key]:
                v_min[key] = m
            if key not in v_max or m > v_max[key]:
                v_max[key] = m
        times.append(time.perf_counter() - t0)
    if failed == trials:
        raise DivergenceError("every MC trial failed")
    return McEnvelope(x_min, x_max, v_min, v_max, trials, failed, seed, times)


# -- accuracy indices ---------------------------------------------------------------

def _endpoints(x):
    if isinstance(x, IntervalVector):
        return x.lo, x.hi
    if isinstance(x, dict):
        keys = sorted(x)
        return (np.array([x[k].lo for k in keys]), np.array([x[k].hi for k in keys]))
    lo, hi = x
    return np.asarray(lo, float), np.asarray(hi, float)


def q1(x):
    """Mean interval width."""
    lo, hi = _endpoints(x)
    if lo.size == 0:
        raise UsageError("q1 of an empty vector")
    return float(np.mean(hi - lo))


def q2(x, truth):
    """Max over states of the larger distance from truth to either bound."""
    if isinstance(x, dict):
        keys = sorted(x)
        lo, hi = _endpoints(x)
        t = np.array([truth[k] for k in keys], dtype=float)
    else:
        lo, hi = _endpoints(x)
        t = np.asarray(truth, dtype=float).reshape(-1)
    if t.size != lo.size:
        raise UsageError(f"dimension mismatch {lo.size} vs {t.size}")
    return float(np.max(np.maximum(np.abs(hi - t), np.abs(t - lo))))


def width_sums(index, x):
    """Per-phase sums of state widths, split into real and imaginary parts."""
    w = x.hi - x.lo
    out = {}
    for ph in "ABC":
        re = sum(w[s] for (_, p), s in index.ir.items() if p == ph)
        im = sum(w[s] for (_, p), s in index.ix.items() if p == ph)
        if ph in index.vr:
            re += w[index.vr[ph]]
            im += w[index.vx[ph]]
        out[ph] = {"re": float(re), "im": float(im)}
    return out


@dataclass
class AccuracyReport:
    method: str
    q1: float
    q2: float
    width_sums: dict
    contains_truth: bool
    contains_mc: object  # bool or None when no envelope was run
    iterations: int = 0
    time_initial: float = 0.0
    time_iterate: float = 0.0

    @property
    def time_total(self):
        return self.time_initial + self.time_iterate


def voltage_containment(vbox, values, slack=1e-9):
    """True when every (bus, phase) value lies in its interval (within ``slack``)."""
    return all(vbox[k].lo - slack <= v <= vbox[k].hi + slack for k, v in values.items())


def envelope_containment(vbox, env, slack=1e-9):
    return all(vbox[k].lo - slack <= env.v_min[k] and env.v_max[k] <= vbox[k].hi + slack
               for k in env.v_min)


def accuracy_report(method, index, x, vbox, v_truth, env=None, solver_report=None):
    """Metrics of one interval solution; indices are taken over bus |V|."""
    rep = AccuracyReport(
        method=method,
        q1=q1(vbox),
        q2=q2(vbox, v_truth),
        width_sums=width_sums(index, x),
        contains_truth=voltage_containment(vbox, v_truth),
        contains_mc=None if env is None else envelope_containment(vbox, env),
    )
    if solver_report is not None:
        rep.iterations = solver_report.iterations
        rep.time_initial = solver_report.time_initial
        rep.time_iterate = solver_report.time_iterate
    return rep


def compare_methods(reports, mc=None):
    """Rows for a method-comparison table; adds an MC row and speedups when given."""
    if not reports:
        raise UsageError("no reports to compare")
    rows = []
    for r in reports:
        row = {
            "method": r.method, "Q1": r.q1, "Q2 (max over states)": r.q2,
            "iterations": r.iterations, "time_initial_s": r.time_initial,
            "time_per_iteration_s": r.time_iterate / r.iterations if r.iterations else 0.0,
            "time_total_s": r.time_total, "contains_truth": r.contains_truth,
            "contains_mc": r.contains_mc,
        }
        for ph, d in r.width_sums.items():
            row[f"width_sum_{ph}_re"] = d["re"]
            row[f"width_sum_{ph}_im"] = d["im"]
        if mc is not None and r.time_total > 0:
            row["speedup_vs_mc"] = mc.total_time / r.time_total
        rows.append(row)
    if mc is not None:
        rows.append({"method": f"MC({mc.trials})", "time_total_s": mc.total_time,
                     "failed_trials": mc.failed})
    return rows


def bound_rows(vbox, v_truth, env=None):
    """Per bus/phase rows: bus, phase, lo, hi, truth, mc_min, mc_max."""
    from .measurements import natural_key

    rows = []
    for (bus, ph) in sorted(vbox, key=lambda k: (natural_key(k[0]), k[1])):
        iv = vbox[(bus, ph)]
        rows.append({
            "bus": bus, "phase": ph, "lo": iv.lo, "hi": iv.hi,
            "truth": v_truth.get((bus, ph), float("nan")),
            "mc_min": env.v_min.get((bus, ph), float("nan")) if env else float("nan"),
            "mc_max": env.v_max.get((bus, ph), float("nan")) if env else float("nan"),
        })
    return rows


def rows_to_csv(rows):
    if not rows:
        return ""
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def to_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=float)
