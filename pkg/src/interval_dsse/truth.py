"""Ground truth by three-phase backward/forward sweep, and synthetic measurements."""

import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, UsageError
from .measurements import Measurement, MeasurementSet, slack_reference
from .network import PHASE_IDX, PHASES, dg_point_power, path_to_slack


@dataclass(frozen=True)
class ErrorSpec:
    """Maximum errors; sigma = max/3 so that +-max is the 3-sigma band."""

    pmu_mag_maxpct: float = 0.7
    pmu_angle_max_crad: float = 1.0
    scada_power_maxpct: float = 2.0
    pseudo_power_maxpct: float = 10.0

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if v < 0:
                raise UsageError(f"{k} must be >= 0")

    def pmu_mag_sigma(self, magnitude):
        return self.pmu_mag_maxpct / 100.0 / 3.0 * abs(magnitude)

    @property
    def pmu_angle_sigma(self):
        return self.pmu_angle_max_crad / 100.0 / 3.0

    def pmu_rect_halfwidth(self, magnitude):
        """Bound on each rectangular component of a polar error at the 3-sigma limits."""
        a = self.pmu_mag_maxpct / 100.0
        b = self.pmu_angle_max_crad / 100.0
        return abs(magnitude) * math.hypot(a + 0.5 * b * b, (1.0 + a) * b)

    @classmethod
    def zero(cls):
        return cls(0.0, 0.0, 0.0, 0.0)


@dataclass
class TrueState:
    """Per-unit phasors. Absent phases hold 0."""

    feeder: object
    V: np.ndarray  # (n_bus, 3)
    I: np.ndarray  # (n_branch, 3)
    S_load: np.ndarray  # (n_bus, 3) net consumption used for the solve
    v_slack: dict
    dg_output_kw: dict = field(default_factory=dict)
    sweeps: int = 0

    def voltage(self, bus, phase):
        return self.V[self.feeder.bus_index[str(bus)], PHASE_IDX[phase]]

    def current(self, branch, phase):
        return self.I[self.feeder.branch_index[str(branch)], PHASE_IDX[phase]]

    def flow_power(self, branch, phase):
        """Sending-end complex power of ``branch`` on ``phase``."""
        br = self.feeder.branch(branch)
        return self.voltage(br.from_bus, phase) * np.conj(self.current(branch, phase))

    def bus_current(self, bus, phase):
        """Current consumed at ``bus``: inflow minus outflows."""
        f = self.feeder
        k = PHASE_IDX[phase]
        par = f.parent_branch(bus)
        i = self.I[f.branch_index[par.id], k] if par is not None else 0.0
        for br in f.child_branches(bus):
            i = i - self.I[f.branch_index[br.id], k]
        return i

    def injection_power(self, bus, phase):
        """Net consumed power at ``bus``."""
        return self.voltage(bus, phase) * np.conj(self.bus_current(bus, phase))

    def kcl_residual(self):
        f = self.feeder
        worst = 0.0
        for b in f.buses[1:]:
            for ph in b.phases:
                k = PHASE_IDX[ph]
                v = self.V[f.bus_index[b.id], k]
                want = np.conj(self.S_load[f.bus_index[b.id], k] / v)
                worst = max(worst, abs(self.bus_current(b.id, ph) - want))
        return worst

    def magnitudes(self):
        return np.abs(self.V)

    def state_vector(self, index):
        """Truth arranged in the estimator's state order."""
        x = np.zeros(index.n)
        for ph in index.slack_phases:
            v = self.voltage(self.feeder.slack, ph)
            x[index.vr[ph]] = v.real
            x[index.vx[ph]] = v.imag
        for (bid, ph), s in index.ir.items():
            c = self.current(bid, ph)
            x[s] = c.real
            x[index.ix[(bid, ph)]] = c.imag
        return x


def net_load_pu(feeder, dg_output_kw=None):
    """(n_bus, 3) complex consumption in per-unit: loads minus DG injections."""
    S = np.zeros((len(feeder.buses), 3), dtype=complex)
    for k, b in enumerate(feeder.buses):
        for ph, (p, q) in b.load.items():
            S[k, PHASE_IDX[ph]] += complex(p, q) / feeder.s_base_kw
    outputs = default_dg_outputs(feeder) if dg_output_kw is None else dg_output_kw
    for u in feeder.dg:
        p_kw = outputs.get(u.id, u.p_kw.midpoint())
        if not (u.p_kw.lo - 1e-9 <= p_kw <= u.p_kw.hi + 1e-9):
            raise UsageError(f"DG {u.id} output {p_kw} kW outside {u.p_kw}")
        p, q = dg_point_power(u, p_kw)
        k = feeder.bus_index[u.bus]
        for ph in u.phases:
            S[k, PHASE_IDX[ph]] -= complex(p, q) / (len(u.phases) * feeder.s_base_kw)
    return S


def default_dg_outputs(feeder):
    return {u.id: u.p_kw.midpoint() for u in feeder.dg}


def solve_power_flow(f, dg_point_outputs=None, v_slack=1.0, tol=1e-10, max_sweeps=100):
    """Fixed point of the backward/forward sweep with constant-PQ wye loads."""
    if not f.is_thin:
        raise UsageError("power flow needs point impedances")
    ref = slack_reference(abs(v_slack) if not isinstance(v_slack, dict) else 1.0)
    if isinstance(v_slack, dict):
        ref = dict(v_slack)
    nb, nbr = len(f.buses), len(f.branches)
    masks = np.zeros((nb, 3), dtype=bool)
    for k, b in enumerate(f.buses):
        for ph in b.phases:
            masks[k, PHASE_IDX[ph]] = True
    v0 = np.array([ref.get(p, 0.0) for p in PHASES], dtype=complex)
    S = net_load_pu(f, dg_point_outputs)

    V = np.where(masks, v0[None, :], 0.0)
    from_idx = np.array([f.bus_index[br.from_bus] for br in f.branches], dtype=int)
    to_idx = np.array([f.bus_index[br.to_bus] for br in f.branches], dtype=int)
    Z = np.array([br.z for br in f.branches])
    # branch k feeds bus to_idx[k]; branches are in BFS order of to-bus
    I = np.zeros((nbr, 3), dtype=complex)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            I_load = np.where(masks, np.conj(S / np.where(masks, V, 1.0)), 0.0)
        # backward sweep
        acc = I_load.copy()
        for k in range(nbr - 1, -1, -1):
            I[k] = acc[to_idx[k]]
            acc[from_idx[k]] += I[k]
        # forward sweep
        V_new = V.copy()
        for k in range(nbr):
            V_new[to_idx[k]] = np.where(masks[to_idx[k]], V_new[from_idx[k]] - Z[k] @ I[k], 0.0)
        delta = np.max(np.abs(V_new - V))
        V = V_new
        if not np.all(np.isfinite(V)):
            break
        if delta < tol:
            break
    else:
        raise DivergenceError(f"power flow did not converge in {max_sweeps} sweeps")
    if not np.all(np.isfinite(V)) or delta >= tol:
        raise DivergenceError(f"power flow did not converge in {max_sweeps} sweeps")
    # final backward sweep so currents match the converged voltages
    I_load = np.where(masks, np.conj(S / np.where(masks, V, 1.0)), 0.0)
    acc = I_load.copy()
    for k in range(nbr - 1, -1, -1):
        I[k] = acc[to_idx[k]]
        acc[from_idx[k]] += I[k]
    outputs = default_dg_outputs(f)
    if dg_point_outputs:
        outputs.update(dg_point_outputs)
    return TrueState(f, V, I, S, ref, outputs, sweeps)


# -- placements & synthesis ---------------------------------------------------

@dataclass(frozen=True)
class Placements:
    """Where real meters sit. Pseudo and zero-injection channels are implied.

    ``pmu_buses``: each PMU measures its bus voltage and the current of the
    branch feeding the bus (for the slack: its first outgoing branch).
    ``scada_flows``: branch ids with sending-end P/Q meters on every phase.
    """

    pmu_buses: tuple = ()
    scada_flows: tuple = ()
    zero_injection_sigma: float = 1e-4
    sigma_floor: float = 1e-5

    def pmu_branches(self, feeder):
        out = []
        for b in self.pmu_buses:
            if str(b) == feeder.slack:
                kids = feeder.child_branches(b)
                if kids:
                    out.append(kids[0].id)
            else:
                out.append(feeder.parent_branch(b).id)
        return out


def default_placements(feeder):
    """Meter locations used in the bundled cases."""
    if feeder.name.startswith("ieee13"):
        return Placements(("650", "671"), ("632-633", "645-646", "684-652"))
    if feeder.name.startswith("ieee123"):
        return Placements(
            ("149", "8", "25", "54", "97", "108"),
            ("1-7", "9-14", "15-16", "13-52", "18-35", "44-45", "57-60", "76-77", "86-87",
             "99-100", "110-112"))
    kids = feeder.child_branches(feeder.slack)
    return Placements((feeder.slack,), (kids[0].id,) if kids else ())


def _resolve_branch(feeder, bid):
    try:
        return feeder.branch(bid)
    except UsageError:
        a, b = str(bid).split("-", 1)
        return feeder.branch_between(a, b)


def channel_rng(seed, channel, stream=()):
    key = [int(seed) & 0xFFFFFFFF, *[int(s) for s in stream], zlib.crc32(channel.encode())]
    return np.random.default_rng(np.random.SeedSequence(key))


def _noise(rng, size, truncate):
    z = rng.standard_normal(size)
    if truncate:
        bad = np.abs(z) > 3.0
        while np.any(bad):
            z[bad] = rng.standard_normal(int(bad.sum()))
            bad = np.abs(z) > 3.0
    return z


def synthesize_measurements(t, placements=None, spec=None, seed=0, truncate=False,
                            stream=(), include_dg_intervals=True, dg_override=None):
    """Noisy measurements of the true state ``t``.

    Sigma is computed from the true value and recorded with each channel
    (floored at ``placements.sigma_floor``); noise uses the unfloored sigma,
    so a zero error spec reproduces the truth exactly. Each channel draws
    from its own stream keyed by (seed, *stream, channel id).
    ``dg_override`` maps unmetered DG ids to point outputs in kW, recorded
    as thin DG intervals (used by Monte Carlo trials).
    """
    f = t.feeder
    placements = placements or default_placements(f)
    spec = spec or ErrorSpec()
    floor = placements.sigma_floor
    entries = []

    def polar_pmu(kind, element, phase, true_val):
        ch = f"{kind}:{element}:{phase}"
        rng = channel_rng(seed, ch, stream)
        e = _noise(rng, 2, truncate)
        em = e[0] * spec.pmu_mag_maxpct / 100.0 / 3.0
        ea = e[1] * spec.pmu_angle_sigma
        meas = true_val * (1.0 + em) * complex(math.cos(ea), math.sin(ea))
        s = max(spec.pmu_rect_halfwidth(abs(true_val)) / 3.0, floor)
        entries.append(Measurement(kind, element, phase, (meas.real, meas.imag), (s, s)))

    def power(kind, element, phase, s_true, maxpct, bus=""):
        ch = f"{kind}:{element}:{phase}"
        rng = channel_rng(seed, ch, stream)
        e = _noise(rng, 2, truncate)
        sp_, sq_ = maxpct / 100.0 / 3.0 * abs(s_true.real), maxpct / 100.0 / 3.0 * abs(s_true.imag)
        val = (s_true.real + e[0] * sp_, s_true.imag + e[1] * sq_)
        entries.append(Measurement(kind, element, phase, val, (max(sp_, floor), max(sq_, floor)), bus))

    for b in placements.pmu_buses:
        bus = f.bus(b)
        for ph in bus.phases:
            polar_pmu("pmuV", bus.id, ph, t.voltage(bus.id, ph))
    for bid in placements.pmu_branches(f):
        br = f.branch(bid)
        for ph in br.phases:
            polar_pmu("pmuI", br.id, ph, t.current(br.id, ph))
    for bid in placements.scada_flows:
        br = _resolve_branch(f, bid)
        for ph in br.phases:
            power("scadaFlow", br.id, ph, t.flow_power(br.id, ph), spec.scada_power_maxpct, br.from_bus)

    # loads: pseudo-measurements; buses/phases without load get virtual zero injections
    for k, b in enumerate(f.buses):
        if b.id == f.slack:
            continue
        for ph in b.phases:
            if ph in b.load and b.load[ph] != (0.0, 0.0):
                s_true = complex(*b.load[ph]) / f.s_base_kw
                power("injPseudo", b.id, ph, s_true, spec.pseudo_power_maxpct)
            else:
                z = placements.zero_injection_sigma
                entries.append(Measurement("zeroInj", b.id, ph, (0.0, 0.0), (z, z)))

    for u in f.dg:
        p_kw = t.dg_output_kw.get(u.id, u.p_kw.midpoint())
        k = len(u.phases)
        if u.metered:
            p, q = dg_point_power(u, p_kw)
            s_true = complex(p, q) / (k * f.s_base_kw)
            for ph in u.phases:
                power("dgMeter", u.id, ph, s_true, spec.scada_power_maxpct, u.bus)
        elif include_dg_intervals:
            if dg_override is not None and u.id in dg_override:
                p, q = dg_point_power(u, dg_override[u.id])
                val = (p, p, q, q)
            else:
                from .network import dg_power_intervals
                P, Q = dg_power_intervals(u)
                val = (P.lo, P.hi, Q.lo, Q.hi)
            scale = 1.0 / (k * f.s_base_kw)
            val = tuple(v * scale for v in val)
            for ph in u.phases:
                entries.append(Measurement("dgInterval", u.id, ph, val, (0.0, 0.0), u.bus))

    return MeasurementSet(tuple(entries), dict(t.v_slack), f.s_base_kw,
                          label=f"seed={seed}")


def bus_voltage_truth(t):
    """dict (bus, phase) -> complex for every present phase."""
    out = {}
    for b in t.feeder.buses:
        for ph in b.phases:
            out[(b.id, ph)] = t.voltage(b.id, ph)
    return out


def forward_voltage_check(t):
    """Max mismatch between V and slack - sum(z i) along each path (KVL)."""
    f = t.feeder
    worst = 0.0
    for b in f.buses:
        v = np.array([t.v_slack.get(p, 0) for p in PHASES], dtype=complex)
        for br in path_to_slack(f, b.id):
            v = v - br.z @ t.I[f.branch_index[br.id]]
        for ph in b.phases:
            worst = max(worst, abs(v[PHASE_IDX[ph]] - t.voltage(b.id, ph)))
    return worst
