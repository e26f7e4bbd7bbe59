"""Branch-current state vector, linear measurement Jacobian and WLS estimators.

State order: slack-voltage real parts (per slack phase), slack-voltage
imaginary parts, then branch-current real parts (branch order, then phase)
and branch-current imaginary parts. Every bus voltage is linear in the state:
``V_b = V_slack - sum over the slack-to-b path of Z_k I_k``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import DivergenceError, UnobservableError, UsageError
from .interval_core import Interval, IntervalMatrix, IntervalVector
from .measurements import MeasurementPlan, build_weights, plan_rows, point_values
from .network import PHASE_IDX, path_to_slack


class StateIndex:
    """Slot numbers of every state variable of ``feeder``."""

    def __init__(self, feeder):
        self.feeder = feeder
        self.slack_phases = tuple(feeder.slack_phases)
        k = 0
        self.vr, self.vx = {}, {}
        for ph in self.slack_phases:
            self.vr[ph] = k
            k += 1
        for ph in self.slack_phases:
            self.vx[ph] = k
            k += 1
        self.ir, self.ix = {}, {}
        for br in feeder.branches:
            for ph in br.phases:
                self.ir[(br.id, ph)] = k
                k += 1
        for br in feeder.branches:
            for ph in br.phases:
                self.ix[(br.id, ph)] = k
                k += 1
        self.n = k

    @property
    def n_branch_phases(self):
        return len(self.ir)

    def labels(self):
        out = [None] * self.n
        for ph, s in self.vr.items():
            out[s] = f"Vr[{self.feeder.slack}.{ph}]"
        for ph, s in self.vx.items():
            out[s] = f"Vx[{self.feeder.slack}.{ph}]"
        for (b, ph), s in self.ir.items():
            out[s] = f"Ir[{b}.{ph}]"
        for (b, ph), s in self.ix.items():
            out[s] = f"Ix[{b}.{ph}]"
        return out


@dataclass
class JacobianSystem:
    """Interval Jacobian ``H`` (sparse), its midpoint and the row plan it matches."""

    H: IntervalMatrix
    index: StateIndex
    plan: MeasurementPlan
    m1: int
    m2: int

    @property
    def H_mid(self):
        return self.H.mid()

    @property
    def n(self):
        return self.index.n

    @property
    def m(self):
        return self.m1 + self.m2


def _voltage_row_entries(f, index, bus, phase, out_re, out_im):
    """Append (col, lo, hi) triplets of the real/imag rows of ``V_bus,phase``."""
    a = PHASE_IDX[phase]
    if phase not in index.vr:
        raise UsageError(f"phase {phase} absent at slack")
    out_re.append((index.vr[phase], 1.0, 1.0))
    out_im.append((index.vx[phase], 1.0, 1.0))
    for br in path_to_slack(f, bus):
        for ph in br.phases:
            c = PHASE_IDX[ph]
            r = Interval(br.r_lo[a, c], br.r_hi[a, c])
            x = Interval(br.x_lo[a, c], br.x_hi[a, c])
            jr, jx = index.ir[(br.id, ph)], index.ix[(br.id, ph)]
            # Re: -r*ir + x*ix ; Im: -x*ir - r*ix
            if r.hi != 0.0 or r.lo != 0.0:
                out_re.append((jr, -r.hi, -r.lo))
                out_im.append((jx, -r.hi, -r.lo))
            if x.hi != 0.0 or x.lo != 0.0:
                out_re.append((jx, x.lo, x.hi))
                out_im.append((jr, -x.hi, -x.lo))


def _merge(entries):
    """Sum duplicate columns (interval sum of endpoints is exact only if thin; widen)."""
    acc = {}
    for c, lo, hi in entries:
        if c in acc:
            a = Interval(*acc[c]) + Interval(lo, hi)
            acc[c] = (a.lo, a.hi)
        else:
            acc[c] = (lo, hi)
    return acc


def build_jacobian(feeder, plan, index=None):
    """Interval measurement Jacobian for the rows of ``plan`` (z1 then z2)."""
    if not isinstance(plan, MeasurementPlan):
        plan = plan_rows(plan, sigma_required=False)
    index = index or StateIndex(feeder)
    rows, cols, lo, hi = [], [], [], []
    k = 0
    for r in plan.rows:
        e_re, e_im = [], []
        if r.kind == "V":
            _voltage_row_entries(feeder, index, r.element, r.phase, e_re, e_im)
        elif r.kind == "I":
            key = (feeder.branch(r.element).id, r.phase)
            if key not in index.ir:
                raise UsageError(f"branch {r.element} has no phase {r.phase}")
            e_re.append((index.ir[key], 1.0, 1.0))
            e_im.append((index.ix[key], 1.0, 1.0))
        elif r.kind == "INJ":
            par = feeder.parent_branch(r.element)
            if par is None:
                raise UsageError(f"injection row at slack bus {r.element}")
            e_re.append((index.ir[(par.id, r.phase)], 1.0, 1.0))
            e_im.append((index.ix[(par.id, r.phase)], 1.0, 1.0))
            for ch in feeder.child_branches(r.element):
                if r.phase in ch.phases:
                    e_re.append((index.ir[(ch.id, r.phase)], -1.0, -1.0))
                    e_im.append((index.ix[(ch.id, r.phase)], -1.0, -1.0))
        else:
            raise UsageError(f"unknown row kind {r.kind}")
        for row, ent in ((k, e_re), (k + 1, e_im)):
            for c, (a, b) in _merge(ent).items():
                rows.append(row)
                cols.append(c)
                lo.append(a)
                hi.append(b)
        k += 2
    H = IntervalMatrix.from_triplets(rows, cols, lo, hi, (k, index.n))
    return JacobianSystem(H, index, plan, plan.m1, plan.m2)


def check_observability(H, tol=1e-10):
    """Raise :class:`UnobservableError` when ``H`` lacks full column rank."""
    A = H.toarray() if sp.issparse(H) else np.asarray(H, float)
    m, n = A.shape
    empty = np.where(~np.any(A != 0.0, axis=0))[0]
    if empty.size:
        raise UnobservableError(f"{empty.size} state(s) not measured by any row", empty.tolist())
    if m < n:
        raise UnobservableError(f"{m} rows for {n} states", list(range(n)))
    _, R, piv = sla.qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    bad = d <= tol * max(d[0], 1.0)
    if np.any(bad):
        cols = sorted(int(c) for c in piv[bad])
        raise UnobservableError(f"Jacobian rank {int((~bad).sum())} < {n}", cols)


@dataclass
class WlsResult:
    x: np.ndarray
    iterations: int
    converged: bool
    residual: np.ndarray


def _gain_factor(Hm, w):
    Hd = Hm.toarray() if sp.issparse(Hm) else np.asarray(Hm)
    HtW = Hd.T * w[None, :]
    G = HtW @ Hd
    try:
        cf = sla.cho_factor(G, check_finite=False)
    except np.linalg.LinAlgError:
        check_observability(Hd)
        raise UnobservableError("gain matrix not positive definite", [])
    return cf, HtW


def solve_linear_wls(H, z, w, check=True):
    """Weighted least squares ``argmin (z - Hx)' W (z - Hx)`` for point data."""
    z = np.asarray(z, float)
    w = np.asarray(w, float)
    if check:
        check_observability(H)
    cf, HtW = _gain_factor(H, w)
    x = sla.cho_solve(cf, HtW @ z)
    Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
    return WlsResult(x, 1, True, z - Hd @ x)


def bus_voltages(index, x, feeder=None):
    """Point nodal voltages, dict (bus, phase) -> complex, from state ``x``."""
    f = feeder or index.feeder
    vs = np.zeros(3, complex)
    for ph in index.slack_phases:
        vs[PHASE_IDX[ph]] = complex(x[index.vr[ph]], x[index.vx[ph]])
    V = {f.slack: vs}
    out = {}
    for b in f.buses[1:]:
        br = f.parent_branch(b.id)
        I = np.zeros(3, complex)
        for ph in br.phases:
            I[PHASE_IDX[ph]] = complex(x[index.ir[(br.id, ph)]], x[index.ix[(br.id, ph)]])
        V[b.id] = V[br.from_bus] - br.z @ I
    for b in f.buses:
        for ph in b.phases:
            out[(b.id, ph)] = V[b.id][PHASE_IDX[ph]]
    return out


def solve_iterative_wls(js, ms, w=None, tol=1e-6, max_iter=50):
    """WLS with equivalent currents re-linearised at the running voltage estimate.

    ``H`` is constant; only the measurement vector changes. The first pass
    uses the slack reference phasors.
    """
    plan = js.plan
    Hm = js.H_mid
    if w is None:
        w = build_weights(plan).diag
    check_observability(Hm)
    cf, HtW = _gain_factor(Hm, w)
    z = point_values(plan, v_ref=ms.v_ref)
    x = sla.cho_solve(cf, HtW @ z)
    for it in range(1, max_iter + 1):
        V = bus_voltages(js.index, x)
        z = point_values(plan, voltages=V)
        x_new = sla.cho_solve(cf, HtW @ z)
        step = np.max(np.abs(x_new - x))
        x = x_new
        if not np.all(np.isfinite(x)):
            break
        if step < tol:
            return WlsResult(x, it + 1, True, z - Hm @ x)
    raise DivergenceError(f"iterative WLS did not converge in {max_iter} iterations")


# -- interval post-processing -----------------------------------------------------

def interval_bus_voltages(index, X, feeder=None):
    """Enclosures (re, im) of every nodal voltage for state box ``X``.

    Uses the interval branch impedances, so the result encloses every
    voltage reachable from any state in ``X`` and any admissible line
    parameter.
    """
    f = feeder or index.feeder
    lo, hi = X.lo, X.hi
    st = lambda s: Interval(lo[s], hi[s])
    V = {f.slack: {ph: (st(index.vr[ph]), st(index.vx[ph])) for ph in index.slack_phases}}
    for b in f.buses[1:]:
        br = f.parent_branch(b.id)
        parent = V[br.from_bus]
        cur = {ph: (st(index.ir[(br.id, ph)]), st(index.ix[(br.id, ph)])) for ph in br.phases}
        out = {}
        for a in b.phases:
            ia = PHASE_IDX[a]
            vr, vx = parent[a]
            for ph, (ir, ix) in cur.items():
                c = PHASE_IDX[ph]
                r = Interval(br.r_lo[ia, c], br.r_hi[ia, c])
                xx = Interval(br.x_lo[ia, c], br.x_hi[ia, c])
                vr = vr - (r * ir - xx * ix)
                vx = vx - (xx * ir + r * ix)
            out[a] = (vr, vx)
        V[b.id] = out
    return {(b, ph): v for b, d in V.items() for ph, v in d.items()}


def magnitude_bounds(vr, vx):
    """Rigorous [min, max] of |v| over the rectangle vr x vx."""
    def near(i):
        return 0.0 if i.lo <= 0.0 <= i.hi else min(abs(i.lo), abs(i.hi))

    def far(i):
        return max(abs(i.lo), abs(i.hi))

    lo = Interval(near(vr)).sqr() + Interval(near(vx)).sqr()
    hi = Interval(far(vr)).sqr() + Interval(far(vx)).sqr()
    return Interval(lo.sqrt().lo, hi.sqrt().hi)


def voltage_magnitude_box(index, X, feeder=None):
    """dict (bus, phase) -> Interval enclosing |V|."""
    return {k: magnitude_bounds(*v) for k, v in interval_bus_voltages(index, X, feeder).items()}


def states_to_bus_voltages(x, index):
    """Nodal voltages from a point state (dict of complex) or an interval state
    (dict of (re, im) Interval pairs), with magnitudes (float or Interval)."""
    if isinstance(x, IntervalVector):
        if x.dim != index.n:
            raise UsageError(f"state has dim {x.dim}, index has {index.n}")
        V = interval_bus_voltages(index, x)
        return V, {k: magnitude_bounds(*v) for k, v in V.items()}
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != index.n:
        raise UsageError(f"state has dim {x.size}, index has {index.n}")
    V = bus_voltages(index, x)
    return V, {k: abs(v) for k, v in V.items()}
