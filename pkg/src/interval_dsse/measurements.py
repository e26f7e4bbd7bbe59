"""Measurement sets and their conversion to interval measurement vectors.

A :class:`MeasurementSet` holds raw per-phase channels in per-unit. The
planner turns them into ordered complex rows:

* PMU voltages, then PMU currents, then equivalent currents (SCADA flows
  followed by bus injections), each sorted by (element, phase);
* bus injections at a bus/phase hosting an unmetered DG unit leave ``z1`` and
  become a ``z2`` row whose value is the load interval minus the DG interval.

Every complex row expands to two real rows (real part, imaginary part).
Power is consumption-positive at buses and sending-end at branches; DG power
is injection-positive.
"""

import json
import math
import re
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, UsageError
from .interval_core import Interval, IntervalVector
from .network import PHASES

KINDS = ("pmuV", "pmuI", "scadaFlow", "injPseudo", "zeroInj", "dgMeter", "dgInterval")


def natural_key(s):
    return tuple(int(t) if t.isdigit() else t for t in re.split(r"(\d+)", str(s)))


def slack_reference(v_mag=1.0, phases=PHASES):
    """Balanced positive-sequence phasors A∠0, B∠-120°, C∠+120°."""
    ang = {"A": 0.0, "B": -2.0 * math.pi / 3.0, "C": 2.0 * math.pi / 3.0}
    return {p: complex(v_mag * math.cos(ang[p]), v_mag * math.sin(ang[p])) for p in phases}


@dataclass(frozen=True)
class Measurement:
    """One per-phase channel.

    ``value`` is (re, im) for PMU channels, (P, Q) for power channels and
    (P_lo, P_hi, Q_lo, Q_hi) for ``dgInterval``. ``sigma`` matches the first
    two components; it is (0, 0) for ``dgInterval``.
    """

    kind: str
    element: str
    phase: str
    value: tuple
    sigma: tuple
    bus: str = ""  # host bus for DG channels

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown measurement kind {self.kind!r}")
        if self.phase not in PHASES:
            raise UsageError(f"unknown phase {self.phase!r}")

    @property
    def key(self):
        return (natural_key(self.element), self.phase)


@dataclass(frozen=True)
class MeasurementSet:
    entries: tuple
    v_ref: dict  # phase -> complex reference phasor (slack voltage)
    s_base_kw: float = 1.0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        for m in self.entries:
            if m.kind in ("dgInterval", "zeroInj"):
                continue
            if any(s < 0 for s in m.sigma):
                raise ConfigurationError(f"negative sigma on {m.kind} {m.element}/{m.phase}")

    def of_kind(self, kind):
        return [m for m in self.entries if m.kind == kind]

    def replace_entries(self, entries):
        return MeasurementSet(tuple(entries), self.v_ref, self.s_base_kw, self.label)

    def to_document(self):
        return {
            "label": self.label,
            "s_base_kw": self.s_base_kw,
            "v_ref": {p: [v.real, v.imag] for p, v in self.v_ref.items()},
            "entries": [
                {"type": m.kind, "location": m.element, "bus": m.bus, "phase": m.phase,
                 "value": list(m.value), "sigma": list(m.sigma)}
                for m in self.entries
            ],
        }

    @classmethod
    def from_document(cls, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        entries = tuple(
            Measurement(e["type"], str(e["location"]), e["phase"], tuple(e["value"]),
                        tuple(e.get("sigma", (0.0, 0.0))), str(e.get("bus", "")))
            for e in doc["entries"])
        v_ref = {p: complex(v[0], v[1]) for p, v in doc["v_ref"].items()}
        return cls(entries, v_ref, float(doc.get("s_base_kw", 1.0)), doc.get("label", ""))

    def validate_against(self, feeder):
        """Check that every entry maps to an element and present phase of ``feeder``."""
        for m in self.entries:
            if m.kind in ("pmuV", "injPseudo", "zeroInj"):
                phases = feeder.bus(m.element).phases
            elif m.kind in ("pmuI", "scadaFlow"):
                phases = feeder.branch(m.element).phases
            else:
                u = feeder.dg_unit(m.element)
                phases = u.phases
            if m.phase not in phases:
                raise UsageError(f"{m.kind} at {m.element} references absent phase {m.phase}")


# -- conversions --------------------------------------------------------------

def power_to_equivalent_current(P, Q, v_ref):
    """Interval enclosure of ``conj((P + jQ) / v_ref)`` as (I_r, I_x)."""
    v_ref = complex(v_ref)
    if v_ref == 0:
        raise DomainError("reference voltage is zero")
    P = P if isinstance(P, Interval) else Interval(P)
    Q = Q if isinstance(Q, Interval) else Interval(Q)
    vr, vx = Interval(v_ref.real), Interval(v_ref.imag)
    mag2 = vr.sqr() + vx.sqr()
    i_r = (P * vr + Q * vx) / mag2
    i_x = (P * vx - Q * vr) / mag2
    return i_r, i_x


def equivalent_current(P, Q, v):
    """Point version: the current drawn by S = P + jQ at voltage ``v``."""
    return np.conj((P + 1j * Q) / v)


def current_sigma(sig_p, sig_q, v_ref):
    """Per-component sigma of the equivalent current (fixed reference linearization)."""
    vr, vx = v_ref.real, v_ref.imag
    m2 = vr * vr + vx * vx
    s_r = math.sqrt(sig_p ** 2 * vr ** 2 + sig_q ** 2 * vx ** 2) / m2
    s_x = math.sqrt(sig_p ** 2 * vx ** 2 + sig_q ** 2 * vr ** 2) / m2
    return s_r, s_x


def _band(value, sigma):
    return Interval.from_midrad(value, 3.0 * sigma) if sigma > 0 else Interval(value)


# -- row planning ---------------------------------------------------------------

@dataclass(frozen=True)
class RowSpec:
    """One complex measurement row.

    ``kind`` is ``V`` (bus voltage), ``I`` (branch current) or ``INJ`` (bus
    injection, KCL). For equivalent-current rows ``p``/``q`` hold the point
    power used in iterative re-linearization and ``vbus`` the bus whose
    voltage divides it.
    """

    kind: str
    element: str
    phase: str
    block: str
    source: str
    re: Interval
    im: Interval
    sigma: tuple = (0.0, 0.0)
    p: float = 0.0
    q: float = 0.0
    p_int: Interval = None
    q_int: Interval = None
    vbus: str = ""


@dataclass
class MeasurementPlan:
    z1_rows: list = field(default_factory=list)
    z2_rows: list = field(default_factory=list)

    @property
    def m1(self):
        return 2 * len(self.z1_rows)

    @property
    def m2(self):
        return 2 * len(self.z2_rows)

    @property
    def rows(self):
        return self.z1_rows + self.z2_rows


def _power_row(kind, element, phase, block, source, p_int, q_int, p, q, sig_p, sig_q, v_ref, vbus):
    i_r, i_x = power_to_equivalent_current(p_int, q_int, v_ref)
    sig = current_sigma(sig_p, sig_q, v_ref) if block == "z1" else (1.0, 1.0)
    return RowSpec(kind, element, phase, block, source, i_r, i_x, sig, p, q, p_int, q_int, vbus)


def plan_rows(ms, sigma_required=True):
    """Order and combine the channels of ``ms`` into z1 / z2 rows."""
    by_kind = {k: sorted(ms.of_kind(k), key=lambda m: m.key) for k in KINDS}
    plan = MeasurementPlan()

    for m in by_kind["pmuV"]:
        plan.z1_rows.append(RowSpec("V", m.element, m.phase, "z1", "pmuV",
                                    _band(m.value[0], m.sigma[0]), _band(m.value[1], m.sigma[1]),
                                    tuple(m.sigma)))
    for m in by_kind["pmuI"]:
        plan.z1_rows.append(RowSpec("I", m.element, m.phase, "z1", "pmuI",
                                    _band(m.value[0], m.sigma[0]), _band(m.value[1], m.sigma[1]),
                                    tuple(m.sigma)))
    for m in by_kind["scadaFlow"]:
        v = ms.v_ref[m.phase]
        plan.z1_rows.append(_power_row(
            "I", m.element, m.phase, "z1", "scadaFlow",
            _band(m.value[0], m.sigma[0]), _band(m.value[1], m.sigma[1]),
            m.value[0], m.value[1], m.sigma[0], m.sigma[1], v, m.bus))

    # injections: group every channel by (bus, phase)
    groups = {}
    for kind in ("injPseudo", "zeroInj", "dgMeter", "dgInterval"):
        for m in by_kind[kind]:
            bus = m.bus if kind.startswith("dg") else m.element
            groups.setdefault((natural_key(bus), m.phase, bus), []).append(m)

    for (_, phase, bus), chans in sorted(groups.items(), key=lambda kv: kv[0][:2]):
        v = ms.v_ref[phase]
        loads = [m for m in chans if m.kind in ("injPseudo", "zeroInj")]
        meters = [m for m in chans if m.kind == "dgMeter"]
        free = [m for m in chans if m.kind == "dgInterval"]
        if len(loads) > 1:
            raise UsageError(f"more than one load channel at {bus}/{phase}")
        p_int, q_int = Interval(0.0), Interval(0.0)
        p, q, var_p, var_q = 0.0, 0.0, 0.0, 0.0
        sources = []
        if loads:
            m = loads[0]
            sources.append(m.kind)
            if m.kind == "injPseudo":
                p_int, q_int = _band(m.value[0], m.sigma[0]), _band(m.value[1], m.sigma[1])
                p, q = m.value
                var_p, var_q = m.sigma[0] ** 2, m.sigma[1] ** 2
            else:
                # virtual zero injection: exact value, sigma only sets the weight
                var_p, var_q = m.sigma[0] ** 2, m.sigma[1] ** 2
        for m in meters:
            sources.append("dgMeter")
            p_int = p_int - _band(m.value[0], m.sigma[0])
            q_int = q_int - _band(m.value[1], m.sigma[1])
            p, q = p - m.value[0], q - m.value[1]
            var_p += m.sigma[0] ** 2
            var_q += m.sigma[1] ** 2
        if free:
            for m in free:
                sources.append("dgInterval")
                p_int = p_int - Interval(m.value[0], m.value[1])
                q_int = q_int - Interval(m.value[2], m.value[3])
                p -= 0.5 * (m.value[0] + m.value[1])
                q -= 0.5 * (m.value[2] + m.value[3])
            plan.z2_rows.append(_power_row("INJ", bus, phase, "z2", "+".join(sources),
                                           p_int, q_int, p, q, 1.0, 1.0, v, bus))
        else:
            sp_, sq_ = math.sqrt(var_p), math.sqrt(var_q)
            plan.z1_rows.append(_power_row("INJ", bus, phase, "z1", "+".join(sources),
                                           p_int, q_int, p, q, sp_, sq_, v, bus))

    if sigma_required:
        for r in plan.z1_rows:
            if r.sigma[0] <= 0 or r.sigma[1] <= 0:
                raise ConfigurationError(
                    f"zero sigma on weighted channel {r.source} at {r.element}/{r.phase}")
    return plan


def _stack(rows):
    lo, hi = [], []
    for r in rows:
        lo += [r.re.lo, r.im.lo]
        hi += [r.re.hi, r.im.hi]
    return lo, hi


def build_z1(ms):
    """Interval measurement vector ``[z1]`` (two real rows per complex channel)."""
    plan = ms if isinstance(ms, MeasurementPlan) else plan_rows(ms, sigma_required=False)
    lo, hi = _stack(plan.z1_rows)
    if not lo:
        raise UsageError("measurement set produces no z1 rows")
    return IntervalVector(lo, hi)


def build_z2(dg, v_ref, s_base_kw=1.0, loads=None):
    """Equivalent-current intervals ``[z2]`` for unmetered DG units.

    ``dg`` is a list of :class:`~interval_dsse.network.DGUnit` (metered units are
    skipped); three-phase units are split equally over their phases. ``v_ref``
    maps phase to reference phasor (a bare complex applies to every phase).
    ``loads`` optionally maps (bus, phase) to consumption (P, Q) intervals in
    per-unit, subtracted into the same row. Returns ``None`` when empty.
    """
    from .network import dg_power_intervals

    rows = {}
    for u in dg:
        if u.metered:
            continue
        P, Q = dg_power_intervals(u)
        k = len(u.phases)
        for ph in u.phases:
            pp = P / Interval(k * s_base_kw)
            qq = Q / Interval(k * s_base_kw)
            key = (natural_key(u.bus), ph, u.bus)
            cur = rows.get(key, (Interval(0.0), Interval(0.0)))
            rows[key] = (cur[0] - pp, cur[1] - qq)
    if not rows:
        return None
    lo, hi = [], []
    for key in sorted(rows, key=lambda k: k[:2]):
        _, ph, bus = key
        p_int, q_int = rows[key]
        if loads and (bus, ph) in loads:
            lp, lq = loads[(bus, ph)]
            p_int, q_int = p_int + lp, q_int + lq
        v = v_ref[ph] if isinstance(v_ref, dict) else v_ref
        i_r, i_x = power_to_equivalent_current(p_int, q_int, v)
        lo += [i_r.lo, i_x.lo]
        hi += [i_r.hi, i_x.hi]
    return IntervalVector(lo, hi)


@dataclass(frozen=True)
class WeightMatrix:
    """Diagonal weights: ``1/sigma**2`` on z1 rows, exactly 1 on z2 rows."""

    w1: np.ndarray
    m2: int

    @property
    def diag(self):
        return np.concatenate([self.w1, np.ones(self.m2)])

    @property
    def m1(self):
        return self.w1.size


def build_weights(ms, m2=None):
    plan = ms if isinstance(ms, MeasurementPlan) else plan_rows(ms)
    sig = []
    for r in plan.z1_rows:
        sig += [r.sigma[0], r.sigma[1]]
    sig = np.asarray(sig, dtype=float)
    if np.any(sig <= 0):
        raise ConfigurationError("sigma = 0 on a weighted channel gives infinite weight")
    m2 = plan.m2 if m2 is None else m2
    return WeightMatrix(1.0 / sig ** 2, int(m2))


def point_values(plan, voltages=None, v_ref=None):
    """Point measurement vector for WLS.

    With ``voltages`` (dict (bus, phase) -> complex) equivalent currents are
    recomputed at the estimated nodal voltages; otherwise the fixed reference
    is used. DG interval rows use their midpoint power.
    """
    out = []
    for r in plan.rows:
        if r.kind != "INJ" and r.source in ("pmuV", "pmuI"):
            out += [r.re.midpoint(), r.im.midpoint()]
            continue
        v = voltages[(r.vbus, r.phase)] if voltages is not None else v_ref[r.phase]
        i = equivalent_current(r.p, r.q, v)
        out += [i.real, i.imag]
    return np.asarray(out, dtype=float)


def as_dict(m):
    return asdict(m)
