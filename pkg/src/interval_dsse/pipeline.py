"""Case configuration and the truth -> measurements -> ISE -> metrics pipeline."""

import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import accuracy_report, bound_rows, compare_methods, mc_envelope
from .errors import ConfigurationError, IseError, UsageError
from .estimator import StateIndex, build_jacobian, voltage_magnitude_box
from .interval_core import IntervalVector
from .ise import assemble, extract_states, normalize_variant
from .measurements import _stack, build_weights, build_z1, plan_rows
from .network import apply_line_uncertainty, load_bundled, load_feeder
from .solvers import SOLVERS, solve
from .truth import ErrorSpec, Placements, bus_voltage_truth, default_placements, \
    solve_power_flow, synthesize_measurements

CASES_DIR = Path(__file__).parent / "data" / "cases"


@dataclass
class CaseConfig:
    name: str = "case"
    feeder: str = "ieee13"  # bundled name or path to a feeder document
    v_slack: float = 1.05
    pmu_buses: tuple = None  # None: feeder defaults
    scada_flows: tuple = None
    errors: dict = field(default_factory=dict)  # ErrorSpec overrides
    dg_truth_kw: dict = field(default_factory=dict)
    metered_dg: tuple = ()  # DG ids treated as metered in addition to the feeder's
    line_uncertainty: float = 0.0
    model: str = "IV"
    solvers: tuple = ("mko",)
    trials: int = 0
    seed: int = 0
    truncate: bool = False  # 3-sigma noise truncation (containment runs switch it on)
    eps: float = 1e-4
    out: str = ""

    def __post_init__(self):
        if not (0.0 <= self.line_uncertainty < 0.5):
            raise UsageError("line_uncertainty must lie in [0, 0.5)")
        if self.trials < 0:
            raise UsageError("trials must be >= 0")
        self.model = normalize_variant(self.model)
        self.solvers = tuple(s.lower() for s in self.solvers)
        for s in self.solvers:
            if s == "lp":
                raise UsageError("the LP-based boundary method is not provided; it cannot "
                                 "represent uncertain line parameters")
            if s not in SOLVERS:
                raise UsageError(f"unknown solver {s!r}")

    @classmethod
    def from_document(cls, doc, base=None):
        if isinstance(doc, (str, Path)) and Path(doc).exists():
            base = Path(doc).parent
            doc = json.loads(Path(doc).read_text())
        elif isinstance(doc, str):
            doc = json.loads(doc)
        known = {k: v for k, v in doc.items() if k in cls.__dataclass_fields__}
        unknown = set(doc) - set(known)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        for k in ("pmu_buses", "scada_flows", "solvers", "metered_dg"):
            if known.get(k) is not None:
                known[k] = tuple(str(x) for x in known[k])
        cfg = cls(**known)
        if base is not None and cfg.feeder.endswith(".json") and not Path(cfg.feeder).is_absolute():
            cfg.feeder = str(Path(base) / cfg.feeder)
        return cfg

    def to_document(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


def load_case(name_or_path):
    p = Path(name_or_path)
    if not p.exists():
        p = CASES_DIR / f"{name_or_path}.json"
    if not p.exists():
        raise UsageError(f"no case config {name_or_path!r}")
    return CaseConfig.from_document(p)


def resolve_feeder(spec):
    p = Path(spec)
    if p.suffix == ".json" and p.exists():
        return load_feeder(p)
    return load_bundled(spec)


def build_case_feeder(cfg):
    f = resolve_feeder(cfg.feeder)
    if cfg.metered_dg:
        f = f.with_dg([replace(u, metered=True) if u.id in cfg.metered_dg else u for u in f.dg])
    return f


def placements_for(cfg, f):
    base = default_placements(f)
    return Placements(
        tuple(cfg.pmu_buses) if cfg.pmu_buses is not None else base.pmu_buses,
        tuple(cfg.scada_flows) if cfg.scada_flows is not None else base.scada_flows,
        base.zero_injection_sigma, base.sigma_floor)


@dataclass
class Prepared:
    """Everything up to (and including) the assembled interval system."""

    cfg: CaseConfig
    feeder: object
    est_feeder: object
    truth: object
    placements: Placements
    spec: ErrorSpec
    ms: object
    plan: object
    js: object
    z1: IntervalVector
    z2: object
    W: object
    system: object
    t_assemble: float


def prepare(cfg, feeder=None):
    f = feeder or build_case_feeder(cfg)
    truth = solve_power_flow(f, cfg.dg_truth_kw or None, v_slack=cfg.v_slack)
    pl = placements_for(cfg, f)
    spec = ErrorSpec(**cfg.errors)
    t0 = time.perf_counter()
    ms = synthesize_measurements(truth, pl, spec, seed=cfg.seed, truncate=cfg.truncate)
    plan = plan_rows(ms)
    fe = apply_line_uncertainty(f, cfg.line_uncertainty)
    js = build_jacobian(fe, plan, StateIndex(fe))
    z1 = build_z1(plan)
    lo, hi = _stack(plan.z2_rows)
    z2 = IntervalVector(lo, hi) if lo else None
    W = build_weights(plan)
    system = assemble(cfg.model, js, z1, z2, W)
    return Prepared(cfg, f, fe, truth, pl, spec, ms, plan, js, z1, z2, W, system,
                    time.perf_counter() - t0)


@dataclass
class CaseResult:
    prepared: Prepared
    solutions: dict  # method -> (SolverReport, states IntervalVector, |V| box)
    reports: list
    envelope: object
    v_truth: dict
    failures: dict = field(default_factory=dict)  # method -> error message

    def table(self):
        return compare_methods(self.reports, self.envelope)

    def bounds(self, method="mko"):
        return bound_rows(self.solutions[method][2], self.v_truth, self.envelope)


def run_case(cfg, feeder=None, prepared=None):
    p = prepared or prepare(cfg, feeder)
    v_truth = {k: abs(v) for k, v in bus_voltage_truth(p.truth).items()}
    env = None
    if cfg.trials:
        env = mc_envelope(p.truth, cfg.trials, seed=cfg.seed, placements=p.placements, spec=p.spec,
                          line_fraction=cfg.line_uncertainty, truncate=cfg.truncate)
    sols, reps = {}, []
    failures = {}
    for method in cfg.solvers:
        try:
            rep = solve(method, p.system.A, p.system.B, eps=cfg.eps)
        except IseError as exc:
            failures[method] = f"{type(exc).__name__}: {exc}"
            continue
        x = extract_states(rep.solution, p.system)
        vbox = voltage_magnitude_box(p.js.index, x, p.est_feeder)
        sols[method] = (rep, x, vbox)
        reps.append(accuracy_report(rep.method, p.js.index, x, vbox, v_truth, env, rep))
    return CaseResult(p, sols, reps, env, v_truth, failures)


def write_reports(result, out_dir):
    """CSV bounds per method, a comparison CSV and a JSON summary."""
    from .analysis import rows_to_csv, to_json

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.prepared.cfg
    written = []
    for m in result.solutions:
        path = out / f"{cfg.name}_{m}_bounds.csv"
        path.write_text(rows_to_csv(result.bounds(m)))
        written.append(path)
    table = result.table()
    path = out / f"{cfg.name}_comparison.csv"
    # timings vary run to run; keep them out of the byte-stable files
    stable = [{k: v for k, v in r.items() if "time" not in k and "speedup" not in k} for r in table]
    path.write_text(rows_to_csv(stable))
    written.append(path)
    sysm = result.prepared.system
    summary = {
        # the output directory is where the files land, not an input to them
        "config": {k: v for k, v in cfg.to_document().items() if k != "out"},
        "dimensions": {"n": sysm.n, "m1": sysm.m1, "m2": sysm.m2, "m": sysm.m,
                       "m_plus_n": sysm.size},
        "methods": stable,
        "failures": result.failures,
        "mc": None if result.envelope is None else {
            "trials": result.envelope.trials, "failed": result.envelope.failed},
    }
    path = out / f"{cfg.name}_summary.json"
    path.write_text(to_json(summary))
    written.append(path)
    timing = {"assemble_s": result.prepared.t_assemble,
              "methods": [{k: v for k, v in r.items() if "time" in k or k in ("method", "speedup_vs_mc")}
                          for r in table]}
    path = out / f"{cfg.name}_timing.json"
    path.write_text(to_json(timing))
    written.append(path)
    return written


# -- dimension audit ------------------------------------------------------------

REFERENCE_DIMENSIONS = {
    "three-phase": {"n": 714, "m": 888, "m_plus_n": 1602},
    "balanced": {"n": 238, "m": 296, "m_plus_n": 534},
}


def _dims(cfg, f):
    truth = solve_power_flow(f, cfg.dg_truth_kw or None, v_slack=cfg.v_slack)
    pl = placements_for(cfg, f)
    ms = synthesize_measurements(truth, pl, ErrorSpec(**cfg.errors), seed=cfg.seed)
    plan = plan_rows(ms)
    idx = StateIndex(f)
    counts = {}
    for r in plan.rows:
        counts[r.source] = counts.get(r.source, 0) + 2
    return {"n": idx.n, "m1": plan.m1, "m2": plan.m2, "m": plan.m1 + plan.m2,
            "m_plus_n": idx.n + plan.m1 + plan.m2, "buses": len(f.buses),
            "branches": len(f.branches), "branch_phases": idx.n_branch_phases,
            "slack_phases": len(idx.slack_phases), "rows_by_source": counts}


def audit_dimensions(cfg):
    """State and measurement counts for the phase-masked feeder and two references.

    ``all-three-phase`` forces every bus and branch to carry A, B, C (the
    counting convention behind the 714/888/1602 reference); ``balanced``
    is the single-phase equivalent (238/296/534 reference).
    """
    from .network import all_three_phase, balanced_reduction

    f = build_case_feeder(cfg)
    out = {"feeder": f.name, "modes": {}}
    out["modes"]["phase-masked"] = _dims(cfg, f)
    out["modes"]["all-three-phase"] = _dims(cfg, all_three_phase(f))
    out["modes"]["balanced"] = _dims(cfg, balanced_reduction(f))
    out["reference"] = REFERENCE_DIMENSIONS
    pm, tp = out["modes"]["phase-masked"], out["modes"]["all-three-phase"]
    notes = [
        f"phase-masked n = 2*{pm['slack_phases']} slack + 2*{pm['branch_phases']} branch-phases "
        f"= {pm['n']}; all-three-phase n = {tp['n']} (reference {REFERENCE_DIMENSIONS['three-phase']['n']})",
        f"state delta {tp['n'] - pm['n']} = 2 x {tp['branch_phases'] - pm['branch_phases']} "
        "branch-phases absent on single- and two-phase laterals",
        "m differs from the reference because the reference placement's per-phase channel "
        "list is not published; here every present bus-phase carries one injection row "
        "(pseudo-measurement, zero injection or DG) and each meter spans its present phases",
    ]
    out["notes"] = notes
    return out


def format_audit(a):
    lines = [f"dimension audit: {a['feeder']}"]
    lines.append(f"{'mode':<18}{'n':>7}{'m1':>7}{'m2':>7}{'m':>7}{'m+n':>8}   reference n/m/m+n")
    refs = {"phase-masked": "three-phase", "all-three-phase": "three-phase", "balanced": "balanced"}
    for mode, d in a["modes"].items():
        r = a["reference"][refs[mode]]
        lines.append(f"{mode:<18}{d['n']:>7}{d['m1']:>7}{d['m2']:>7}{d['m']:>7}{d['m_plus_n']:>8}"
                     f"   {r['n']}/{r['m']}/{r['m_plus_n']}")
    for n in a["notes"]:
        lines.append(f"note: {n}")
    return "\n".join(lines)
