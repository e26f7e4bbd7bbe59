"""13-bus end-to-end run: interval bounds on |V| next to truth and a Monte
Carlo envelope, for point and for +-5 % line parameters."""

import sys

from interval_dsse.pipeline import CaseConfig, load_case, run_case

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 200

for name in ("ieee13_case1", "ieee13_case2"):
    cfg = load_case(name)
    cfg = CaseConfig(**{**cfg.__dict__, "trials": trials, "solvers": ("mko",)})
    res = run_case(cfg)
    rep = res.reports[0]
    print(f"\n{name}: line uncertainty {cfg.line_uncertainty:g}, MC trials {trials}")
    print(f"  Q1 {rep.q1:.4f}  Q2 {rep.q2:.4f}  iterations {rep.iterations}  "
          f"truth contained {rep.contains_truth}  MC contained {rep.contains_mc}")
    print(f"  {'bus':>5} {'ph':>2} {'lo':>8} {'truth':>8} {'hi':>8} {'mc_min':>8} {'mc_max':>8}")
    for r in res.bounds("mko"):
        print(f"  {r['bus']:>5} {r['phase']:>2} {r['lo']:8.4f} {r['truth']:8.4f} {r['hi']:8.4f} "
              f"{r['mc_min']:8.4f} {r['mc_max']:8.4f}")
