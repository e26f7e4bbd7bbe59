"""Radial three-phase feeders: buses, coupled-impedance branches, DG units.

Everything is stored in per-unit on the feeder base. Per-phase power base is
``base_MVA / 3``; impedance base is ``base_kV**2 / base_MVA`` with ``base_kV``
line-to-line, so per-phase wye quantities convert with the usual factors.
Branches are oriented away from the slack after loading.
"""

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import FeederError, UsageError
from .interval_core import Interval

PHASES = ("A", "B", "C")
PHASE_IDX = {p: i for i, p in enumerate(PHASES)}


def _phase_tuple(phases, where):
    if isinstance(phases, str):
        phases = list(phases)
    out = []
    for p in phases:
        p = str(p).upper()
        if p not in PHASE_IDX:
            raise FeederError(f"unknown phase {p!r}", where)
        if p in out:
            raise FeederError(f"duplicate phase {p!r}", where)
        out.append(p)
    if not out:
        raise FeederError("phase set is empty", where)
    return tuple(sorted(out, key=PHASE_IDX.get))


@dataclass(frozen=True)
class Bus:
    id: str
    phases: tuple
    load: dict = field(default_factory=dict)  # phase -> (P kW, Q kvar), consumption

    def load_kw(self, phase):
        return self.load.get(phase, (0.0, 0.0))


@dataclass(frozen=True, eq=False)
class Branch:
    """Series element with a 3x3 per-unit impedance; entries may be intervals.

    ``r_lo``/``r_hi``/``x_lo``/``x_hi`` are full 3x3 arrays indexed by A, B, C.
    Rows/cols of absent phases are zero.
    """

    id: str
    from_bus: str
    to_bus: str
    phases: tuple
    r_lo: np.ndarray
    r_hi: np.ndarray
    x_lo: np.ndarray
    x_hi: np.ndarray
    kind: str = "line"

    @property
    def r(self):
        return 0.5 * self.r_lo + 0.5 * self.r_hi

    @property
    def x(self):
        return 0.5 * self.x_lo + 0.5 * self.x_hi

    @property
    def z(self):
        return self.r + 1j * self.x

    @property
    def is_thin(self):
        return bool(np.array_equal(self.r_lo, self.r_hi) and np.array_equal(self.x_lo, self.x_hi))

    def r_interval(self, a, b):
        i, j = PHASE_IDX[a], PHASE_IDX[b]
        return Interval(self.r_lo[i, j], self.r_hi[i, j])

    def x_interval(self, a, b):
        i, j = PHASE_IDX[a], PHASE_IDX[b]
        return Interval(self.x_lo[i, j], self.x_hi[i, j])


@dataclass(frozen=True)
class DGUnit:
    id: str
    bus: str
    phases: tuple
    kind: str  # "PV" or "WTG"
    p_kw: Interval
    power_factor: float = 1.0
    lagging: bool = True
    metered: bool = False


class Feeder:
    """Validated radial feeder. Treat as immutable."""

    def __init__(self, buses, branches, slack, base_kV, base_MVA, dg=(), name="feeder", notes=""):
        self.name = name
        self.notes = notes
        self.base_kV = float(base_kV)
        self.base_MVA = float(base_MVA)
        if self.base_kV <= 0 or self.base_MVA <= 0:
            raise FeederError("bases must be positive", "base")
        self.slack = str(slack)
        self._validate_and_orient(list(buses), list(branches))
        self.dg = tuple(dg)
        self._validate_dg()

    # -- construction helpers ------------------------------------------------
    def _validate_and_orient(self, buses, branches):
        ids = [b.id for b in buses]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise FeederError(f"duplicate bus ids {dup}", "buses")
        bus_map = {b.id: b for b in buses}
        if self.slack not in bus_map:
            raise FeederError(f"slack bus {self.slack!r} not found", "slack")
        br_ids = [br.id for br in branches]
        if len(set(br_ids)) != len(br_ids):
            raise FeederError("duplicate branch ids", "branches")
        for b in buses:
            for ph in b.load:
                if ph not in b.phases:
                    raise FeederError(f"load on absent phase {ph}", f"bus {b.id}")

        adj = {i: [] for i in ids}
        for br in branches:
            where = f"branch {br.id}"
            for end in (br.from_bus, br.to_bus):
                if end not in bus_map:
                    raise FeederError(f"endpoint {end!r} does not exist", where)
            if br.from_bus == br.to_bus:
                raise FeederError("self loop", where)
            for ph in br.phases:
                for end in (br.from_bus, br.to_bus):
                    if ph not in bus_map[end].phases:
                        raise FeederError(f"phase {ph} absent on bus {end}", where)
            absent = [PHASE_IDX[p] for p in PHASES if p not in br.phases]
            for M in (br.r_lo, br.r_hi, br.x_lo, br.x_hi):
                if M.shape != (3, 3):
                    raise FeederError("impedance must be 3x3", where)
                if absent and (np.any(M[absent, :] != 0) or np.any(M[:, absent] != 0)):
                    raise FeederError("nonzero impedance on absent phase", where)
            if np.any(br.r_lo > br.r_hi) or np.any(br.x_lo > br.x_hi):
                raise FeederError("inverted impedance interval", where)
            adj[br.from_bus].append(br)
            adj[br.to_bus].append(br)

        if len(branches) != len(buses) - 1:
            raise FeederError(
                f"not radial: {len(branches)} branches for {len(buses)} buses", "topology")

        # BFS from slack, orienting branches outward
        order = [self.slack]
        parent = {self.slack: None}
        oriented = {}
        q = deque([self.slack])
        while q:
            u = q.popleft()
            for br in adj[u]:
                v = br.to_bus if br.from_bus == u else br.from_bus
                if br.id in oriented:
                    continue
                if v in parent:
                    raise FeederError("cycle detected", f"branch {br.id}")
                if br.from_bus != u:
                    br = replace(br, from_bus=u, to_bus=v)
                oriented[br.id] = br
                parent[v] = br.id
                order.append(v)
                q.append(v)
        if len(order) != len(buses):
            missing = sorted(set(ids) - set(order))
            raise FeederError(f"disconnected buses {missing[:5]}", "topology")
        for v in order[1:]:
            br = oriented[parent[v]]
            extra = set(bus_map[v].phases) - set(br.phases)
            if extra:
                raise FeederError(f"phases {sorted(extra)} not fed by parent branch {br.id}", f"bus {v}")

        self.buses = tuple(bus_map[i] for i in order)
        self.bus_index = {b.id: k for k, b in enumerate(self.buses)}
        # branches in BFS order of their downstream bus
        self.branches = tuple(oriented[parent[v]] for v in order[1:])
        self.branch_index = {br.id: k for k, br in enumerate(self.branches)}
        self._parent = {v: parent[v] for v in order}
        self._children = {v: [] for v in order}
        for br in self.branches:
            self._children[br.from_bus].append(br.id)

    def _validate_dg(self):
        seen = set()
        for u in self.dg:
            where = f"dg {u.id}"
            if u.id in seen:
                raise FeederError("duplicate DG id", where)
            seen.add(u.id)
            if u.bus not in self.bus_index:
                raise FeederError(f"bus {u.bus!r} does not exist", where)
            for ph in u.phases:
                if ph not in self.bus(u.bus).phases:
                    raise FeederError(f"phase {ph} absent on bus {u.bus}", where)
            if u.p_kw.lo < 0:
                raise FeederError("P interval must be non-negative", where)
            if not (0.0 < u.power_factor <= 1.0):
                raise FeederError("power factor must lie in (0, 1]", where)
            if u.kind not in ("PV", "WTG"):
                raise FeederError(f"unknown DG kind {u.kind!r}", where)

    # -- queries -----------------------------------------------------------------
    def bus(self, bus_id):
        try:
            return self.buses[self.bus_index[str(bus_id)]]
        except KeyError:
            raise UsageError(f"unknown bus {bus_id!r}") from None

    def branch(self, branch_id):
        try:
            return self.branches[self.branch_index[str(branch_id)]]
        except KeyError:
            raise UsageError(f"unknown branch {branch_id!r}") from None

    def branch_between(self, a, b):
        a, b = str(a), str(b)
        for br in self.branches:
            if {br.from_bus, br.to_bus} == {a, b}:
                return br
        raise UsageError(f"no branch between {a} and {b}")

    def parent_branch(self, bus_id):
        pid = self._parent[str(bus_id)]
        return None if pid is None else self.branch(pid)

    def child_branches(self, bus_id):
        return [self.branch(i) for i in self._children[str(bus_id)]]

    def dg_unit(self, dg_id):
        for u in self.dg:
            if u.id == dg_id:
                return u
        raise UsageError(f"unknown DG {dg_id!r}")

    @property
    def slack_phases(self):
        return self.bus(self.slack).phases

    @property
    def s_base_kw(self):
        """Per-phase power base in kW."""
        return self.base_MVA * 1000.0 / 3.0

    @property
    def z_base(self):
        return self.base_kV ** 2 / self.base_MVA

    def kw_to_pu(self, p):
        return p / self.s_base_kw

    def with_branches(self, branches):
        f = object.__new__(Feeder)
        f.__dict__.update(self.__dict__)
        f.branches = tuple(branches)
        f.branch_index = {br.id: k for k, br in enumerate(f.branches)}
        return f

    def with_dg(self, dg):
        f = object.__new__(Feeder)
        f.__dict__.update(self.__dict__)
        f.dg = tuple(dg)
        f._validate_dg()
        return f

    @property
    def is_thin(self):
        return all(br.is_thin for br in self.branches)

    def __repr__(self):
        return f"Feeder({self.name!r}, buses={len(self.buses)}, branches={len(self.branches)}, dg={len(self.dg)})"

    # -- serialization -----------------------------------------------------------
    def to_document(self, units="ohm"):
        """Inverse of :func:`load_feeder` for thin feeders."""
        if not self.is_thin:
            raise UsageError("only thin feeders can be serialized")
        scale = self.z_base if units == "ohm" else 1.0
        doc = {
            "name": self.name, "notes": self.notes,
            "base_kV": self.base_kV, "base_MVA": self.base_MVA,
            "slack": self.slack, "impedance_units": units,
            "buses": [{"id": b.id, "phases": "".join(b.phases),
                       "load": {p: list(v) for p, v in b.load.items()}} for b in self.buses],
            "branches": [],
            "dg": [],
        }
        for br in self.branches:
            doc["branches"].append({
                "id": br.id, "from": br.from_bus, "to": br.to_bus, "phases": "".join(br.phases),
                "kind": br.kind,
                "r": (br.r * scale).tolist(), "x": (br.x * scale).tolist(),
            })
        for u in self.dg:
            doc["dg"].append({"id": u.id, "bus": u.bus, "phases": "".join(u.phases), "kind": u.kind,
                              "P": [u.p_kw.lo, u.p_kw.hi], "pf": u.power_factor,
                              "lagging": u.lagging, "metered": u.metered})
        return doc


def _matrix3(m, phases, where, name):
    """Accept a full 3x3 list or a k x k list over the branch's own phases."""
    a = np.array(m, dtype=float)
    k = len(phases)
    if a.shape == (3, 3):
        return a
    if a.shape == (k, k):
        full = np.zeros((3, 3))
        idx = [PHASE_IDX[p] for p in phases]
        full[np.ix_(idx, idx)] = a
        return full
    if a.ndim == 0 and k == 1:
        full = np.zeros((3, 3))
        i = PHASE_IDX[phases[0]]
        full[i, i] = float(a)
        return full
    raise FeederError(f"{name} must be 3x3 or {k}x{k}", where)


def load_feeder(document):
    """Build a :class:`Feeder` from a dict, a JSON string, or a path."""
    if isinstance(document, (str, Path)) and Path(document).exists():
        with open(document) as fh:
            document = json.load(fh)
    elif isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise FeederError(f"not a JSON document: {exc}", "document") from None
    if not isinstance(document, dict):
        raise FeederError("document must be an object", "document")
    for key in ("base_kV", "base_MVA", "slack", "buses", "branches"):
        if key not in document:
            raise FeederError(f"missing key {key!r}", "document")

    base_kV = float(document["base_kV"])
    base_MVA = float(document["base_MVA"])
    units = document.get("impedance_units", "ohm")
    if units not in ("ohm", "pu"):
        raise FeederError(f"impedance_units must be 'ohm' or 'pu', got {units!r}", "document")
    zb = base_kV ** 2 / base_MVA if units == "ohm" else 1.0

    buses = []
    for i, b in enumerate(document["buses"]):
        where = f"buses[{i}]"
        if "id" not in b or "phases" not in b:
            raise FeederError("bus needs id and phases", where)
        phases = _phase_tuple(b["phases"], where)
        load = {}
        for ph, pq in (b.get("load") or {}).items():
            ph = ph.upper()
            if len(pq) != 2:
                raise FeederError(f"load on {ph} must be [P, Q]", where)
            load[ph] = (float(pq[0]), float(pq[1]))
        buses.append(Bus(str(b["id"]), phases, load))

    branches = []
    for i, br in enumerate(document["branches"]):
        where = f"branches[{i}]"
        for key in ("id", "from", "to", "phases", "r", "x"):
            if key not in br:
                raise FeederError(f"missing key {key!r}", where)
        phases = _phase_tuple(br["phases"], where)
        r = _matrix3(br["r"], phases, where, "r") / zb
        x = _matrix3(br["x"], phases, where, "x") / zb
        branches.append(Branch(str(br["id"]), str(br["from"]), str(br["to"]), phases,
                               r, r.copy(), x, x.copy(), br.get("kind", "line")))

    dg = []
    for i, u in enumerate(document.get("dg", [])):
        where = f"dg[{i}]"
        try:
            lo, hi = (float(v) for v in u["P"])
            p = Interval(lo, hi)
        except Exception as exc:
            raise FeederError(f"bad P interval: {exc}", where) from None
        dg.append(DGUnit(str(u["id"]), str(u["bus"]), _phase_tuple(u["phases"], where),
                         str(u.get("kind", "PV")).upper(), p, float(u.get("pf", 1.0)),
                         bool(u.get("lagging", True)), bool(u.get("metered", False))))

    return Feeder(buses, branches, document["slack"], base_kV, base_MVA, dg,
                  name=document.get("name", "feeder"), notes=document.get("notes", ""))


def path_to_slack(f, bus_id):
    """Branches from the slack down to ``bus_id``, in slack-to-bus order."""
    bus_id = str(bus_id)
    if bus_id not in f.bus_index:
        raise UsageError(f"unknown bus {bus_id!r}")
    path = []
    v = bus_id
    while v != f.slack:
        br = f.parent_branch(v)
        path.append(br)
        v = br.from_bus
    path.reverse()
    return path


def apply_line_uncertainty(f, fraction):
    """Widen every nonzero impedance entry to ``[(1-f)e, (1+f)e]``."""
    fraction = float(fraction)
    if not (0.0 <= fraction < 1.0):
        raise UsageError("fraction must lie in [0, 1)")
    if fraction == 0.0:
        return f
    lo_s, hi_s = 1.0 - fraction, 1.0 + fraction
    new = []
    for br in f.branches:
        r, x = br.r, br.x
        a, b = r * lo_s, r * hi_s
        c, d = x * lo_s, x * hi_s
        new.append(replace(br, r_lo=np.minimum(a, b), r_hi=np.maximum(a, b),
                           x_lo=np.minimum(c, d), x_hi=np.maximum(c, d)))
    return f.with_branches(new)


def sample_line_parameters(f, fraction, rng):
    """Thin feeder with each nonzero entry drawn uniformly in its ±fraction band."""
    if fraction == 0.0:
        return f
    new = []
    for br in f.branches:
        sr = rng.uniform(1.0 - fraction, 1.0 + fraction, size=(3, 3))
        sx = rng.uniform(1.0 - fraction, 1.0 + fraction, size=(3, 3))
        r, x = br.r * sr, br.x * sx
        new.append(replace(br, r_lo=r, r_hi=r.copy(), x_lo=x, x_hi=x.copy()))
    return f.with_branches(new)


def tan_phi(pf):
    return math.sqrt(max(0.0, 1.0 - pf * pf)) / pf


def dg_power_intervals(u):
    """(P kW, Q kvar) intervals injected by ``u``; lagging means Q has the sign of P."""
    t = tan_phi(u.power_factor)
    if t == 0.0:
        return u.p_kw, Interval(0.0)
    q = u.p_kw * Interval(t)
    return u.p_kw, (q if u.lagging else -q)


def dg_point_power(u, p_kw):
    """Q (kvar) accompanying a point output ``p_kw`` of ``u``."""
    q = p_kw * tan_phi(u.power_factor)
    return p_kw, (q if u.lagging else -q)


def balanced_reduction(f):
    """Single-phase equivalent of ``f``: one phase per bus, positive-sequence lines.

    Loads and DG outputs are summed over phases and placed on phase A; the
    branch impedance is Zs - Zm over its present phases (self impedance for
    single-phase branches). Used for the dimension audit.
    """
    buses = []
    for b in f.buses:
        p = sum(v[0] for v in b.load.values())
        q = sum(v[1] for v in b.load.values())
        buses.append(Bus(b.id, ("A",), {"A": (p, q)} if b.load else {}))
    branches = []
    for br in f.branches:
        idx = [PHASE_IDX[p] for p in br.phases]
        z = br.z[np.ix_(idx, idx)]
        zs = np.mean(np.diag(z))
        zm = (z.sum() - np.trace(z)) / (len(idx) * (len(idx) - 1)) if len(idx) > 1 else 0.0
        z1 = zs - zm
        r = np.zeros((3, 3))
        x = np.zeros((3, 3))
        r[0, 0], x[0, 0] = z1.real, z1.imag
        branches.append(Branch(br.id, br.from_bus, br.to_bus, ("A",), r, r.copy(), x, x.copy(), br.kind))
    dg = [replace(u, phases=("A",)) for u in f.dg]
    return Feeder(buses, branches, f.slack, f.base_kV, f.base_MVA, dg,
                  name=f.name + "-balanced", notes="balanced reduction")


def all_three_phase(f):
    """Copy of ``f`` with every bus and branch carrying phases A, B, C.

    Missing self impedances are filled with the mean of the present ones so
    the copy stays well posed; only dimensions are meaningful here.
    """
    buses = [Bus(b.id, PHASES, dict(b.load)) for b in f.buses]
    branches = []
    for br in f.branches:
        r, x = br.r.copy(), br.x.copy()
        idx = [PHASE_IDX[p] for p in br.phases]
        rs, xs = np.mean(r[idx, idx]), np.mean(x[idx, idx])
        for i in range(3):
            if i not in idx:
                r[i, i], x[i, i] = rs, xs
        branches.append(Branch(br.id, br.from_bus, br.to_bus, PHASES, r, r.copy(), x, x.copy(), br.kind))
    return Feeder(buses, branches, f.slack, f.base_kV, f.base_MVA, f.dg,
                  name=f.name + "-3ph", notes="all branches forced three-phase")


def bundled_feeder_path(name):
    return Path(__file__).parent / "data" / "feeders" / f"{name}.json"


def load_bundled(name):
    return load_feeder(bundled_feeder_path(name))
