"""Command line front end: ``run``, ``audit``, ``oracle`` and ``mc`` subcommands."""

import argparse
import json
import sys
from pathlib import Path

from .errors import IseError
from .pipeline import (
    audit_dimensions,
    format_audit,
    load_case,
    prepare,
    run_case,
    write_reports,
)


def _case_with_overrides(args):
    cfg = load_case(args.case)
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        kw["trials"] = args.trials
    if getattr(args, "solver", None):
        kw["solvers"] = tuple(s.strip() for s in args.solver.split(","))
    if getattr(args, "model", None):
        kw["model"] = args.model
    if getattr(args, "line_uncertainty", None) is not None:
        kw["line_uncertainty"] = args.line_uncertainty
    if getattr(args, "out", None):
        kw["out"] = args.out
    if kw:
        cfg = type(cfg)(**{**cfg.__dict__, **kw})
    return cfg


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def cmd_run(args):
    cfg = _case_with_overrides(args)
    prepared = prepare(cfg)
    if args.dump:
        from .ise import dump_triplets

        dump_triplets(prepared.system, args.dump)
        print(f"system written to {args.dump}")
    res = run_case(cfg, prepared=prepared)
    s = prepared.system
    print(f"case {cfg.name}: feeder {prepared.feeder.name}, Model {s.variant}, "
          f"n={s.n} m1={s.m1} m2={s.m2} size={s.size}")
    if not prepared.est_feeder.is_thin:
        print(f"line parameters: interval H (+-{cfg.line_uncertainty:g} of nominal)")
    for row in res.table():
        keep = ("method", "Q1", "Q2 (max over states)", "iterations", "time_total_s",
                "contains_truth", "contains_mc", "speedup_vs_mc", "failed_trials")
        print("  " + "  ".join(f"{k}={_fmt(row[k])}" for k in keep if k in row))
    for m, msg in res.failures.items():
        print(f"  method={m}  FAILED  {msg}")
    verdict = all(r.contains_truth and r.contains_mc is not False for r in res.reports)
    print(f"containment: {'contained' if verdict else 'NOT contained'}")
    out = cfg.out or args.out
    if out:
        for p in write_reports(res, out):
            print(f"wrote {p}")
    return 1 if res.failures else 0


def cmd_audit(args):
    cfg = _case_with_overrides(args)
    a = audit_dimensions(cfg)
    if args.json:
        print(json.dumps(a, indent=2))
    else:
        print(format_audit(a))
    return 0


def cmd_oracle(args):
    from .ise import load_triplets
    from .solvers import hull_oracle, solve

    s = load_triplets(args.system)
    hull = hull_oracle(s.A, s.B)
    print("vertex hull:")
    for i, (lo, hi) in enumerate(zip(hull.lo, hull.hi)):
        print(f"  x[{i}] = [{lo!r}, {hi!r}]")
    if args.solver:
        rep = solve(args.solver, s.A, s.B)
        ok = hull.is_subset(rep.solution, slack=1e-9)
        print(f"{rep.method} encloses hull: {ok}")
    return 0


def cmd_mc(args):
    from .analysis import mc_envelope
    from .measurements import natural_key

    cfg = _case_with_overrides(args)
    if cfg.trials <= 0:
        print("error: mc needs --trials >= 1", file=sys.stderr)
        return 2
    p = prepare(cfg)
    env = mc_envelope(p.truth, cfg.trials, seed=cfg.seed, placements=p.placements, spec=p.spec,
                      line_fraction=cfg.line_uncertainty, truncate=cfg.truncate)
    print(f"MC envelope: {env.trials} trials, {env.failed} failed, {env.total_time:.3f} s")
    lines = ["bus,phase,mc_min,mc_max"]
    for k in sorted(env.v_min, key=lambda k: (natural_key(k[0]), k[1])):
        lines.append(f"{k[0]},{k[1]},{env.v_min[k]!r},{env.v_max[k]!r}")
    text = "\n".join(lines) + "\n"
    out = cfg.out or args.out
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        path = Path(out) / f"{cfg.name}_mc.csv"
        path.write_text(text)
        print(f"wrote {path}")
    else:
        print(text, end="")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="interval-dsse",
                                 description="Interval state estimation for distribution feeders")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, case=True):
        if case:
            p.add_argument("case", help="bundled case name (case1..case7, ieee13_case1, toy) or config path")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory for reports")

    p = sub.add_parser("run", help="run a case end to end")
    common(p)
    p.add_argument("--trials", type=int, help="Monte Carlo trials (0 disables)")
    p.add_argument("--solver", help="comma list of mko, krawczyk, iko, ige")
    p.add_argument("--model", help="model variant I, II, III or IV")
    p.add_argument("--line-uncertainty", type=float, dest="line_uncertainty")
    p.add_argument("--dump", help="write the assembled system as triplets")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("audit", help="state and measurement dimensions")
    common(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("oracle", help="vertex hull of a dumped (small) system")
    p.add_argument("system", help="triplet file written by run --dump")
    p.add_argument("--solver", help="also check this solver's enclosure")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("mc", help="Monte Carlo envelope only")
    common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--line-uncertainty", type=float, dest="line_uncertainty")
    p.set_defaults(func=cmd_mc)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IseError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
