"""Regenerate the bundled feeder documents under src/interval_dsse/data/feeders.

Line configurations are in ohm/mile (IEEE test feeder tables); lengths in feet.
Run from the repo root: ``python3 tools/make_feeders.py``.
"""

import json
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "interval_dsse" / "data" / "feeders"
PH = "ABC"


def sym(rows):
    """Full symmetric matrix from upper-triangular rows of complex numbers."""
    k = len(rows)
    m = np.zeros((k, k), dtype=complex)
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            m[i, i + j] = v
            m[i + j, i] = v
    return m


def embed(z, phases):
    full = np.zeros((3, 3), dtype=complex)
    idx = [PH.index(p) for p in phases]
    full[np.ix_(idx, idx)] = z
    return full


def branch(bid, a, b, phases, zfull, kind="line"):
    idx = [PH.index(p) for p in phases]
    z = zfull[np.ix_(idx, idx)]
    return {"id": bid, "from": a, "to": b, "phases": phases, "kind": kind,
            "r": np.round(z.real, 12).tolist(), "x": np.round(z.imag, 12).tolist()}


# ---------------------------------------------------------------- 13-bus
CFG13 = {
    "601": ("ABC", sym([[0.3465 + 1.0179j, 0.1560 + 0.5017j, 0.1580 + 0.4236j],
                        [0.3375 + 1.0478j, 0.1535 + 0.3849j],
                        [0.3414 + 1.0348j]])),
    "602": ("ABC", sym([[0.7526 + 1.1814j, 0.1580 + 0.4236j, 0.1560 + 0.5017j],
                        [0.7475 + 1.1983j, 0.1535 + 0.3849j],
                        [0.7436 + 1.2112j]])),
    "603": ("BC", sym([[1.3294 + 1.3471j, 0.2066 + 0.4591j], [1.3238 + 1.3569j]])),
    "604": ("AC", sym([[1.3238 + 1.3569j, 0.2066 + 0.4591j], [1.3294 + 1.3471j]])),
    "605": ("C", sym([[1.3292 + 1.3475j]])),
    "606": ("ABC", sym([[0.7982 + 0.4463j, 0.3192 + 0.0328j, 0.2849 - 0.0143j],
                        [0.7891 + 0.4041j, 0.3192 + 0.0328j],
                        [0.7982 + 0.4463j]])),
    "607": ("A", sym([[1.3425 + 0.5124j]])),
}


def ieee13():
    base_kV, base_MVA = 4.16, 5.0
    zb = base_kV ** 2 / base_MVA
    lines = [
        ("650", "632", "601", 2000), ("632", "633", "602", 500), ("632", "645", "603", 500),
        ("645", "646", "603", 300), ("632", "671", "601", 2000), ("671", "684", "604", 300),
        ("684", "611", "605", 300), ("684", "652", "607", 800), ("671", "680", "601", 1000),
        ("692", "675", "606", 500),
    ]
    branches = []
    for a, b, cfg, ft in lines:
        ph, z = CFG13[cfg]
        branches.append(branch(f"{a}-{b}", a, b, ph, embed(z, ph) * ft / 5280.0))
    # XFM-1, 500 kVA, 1.1% + j2% on own base, modelled as a series impedance
    zt = (0.011 + 0.02j) * (base_MVA / 0.5) * zb
    branches.append(branch("633-634", "633", "634", "ABC", np.eye(3) * zt, "transformer"))
    branches.append(branch("671-692", "671", "692", "ABC", np.zeros((3, 3)), "switch"))

    phases = {"650": "ABC", "632": "ABC", "633": "ABC", "634": "ABC", "645": "BC", "646": "BC",
              "671": "ABC", "680": "ABC", "684": "AC", "611": "C", "652": "A", "692": "ABC",
              "675": "ABC"}
    load = {b: {} for b in phases}

    def add(bus, ph, p, q):
        cur = load[bus].get(ph, [0.0, 0.0])
        load[bus][ph] = [cur[0] + p, cur[1] + q]

    add("634", "A", 160, 110); add("634", "B", 120, 90); add("634", "C", 120, 90)
    add("645", "B", 170, 125)
    add("646", "B", 230, 132)          # delta B-C load placed on B
    add("652", "A", 128, 86)
    for ph in "ABC":
        add("671", ph, 385, 220)       # delta load, equal wye split
    add("675", "A", 485, 190); add("675", "B", 68, 60); add("675", "C", 290, 212)
    add("692", "C", 170, 151)          # delta C-A load placed on C
    add("611", "C", 170, 80)
    for ph, (p, q) in zip("ABC", [(17, 10), (66, 38), (117, 68)]):
        add("632", ph, p / 2, q / 2)   # distributed 632-671 load, half at each end
        add("671", ph, p / 2, q / 2)
    for ph in "ABC":
        add("675", ph, 0, -200)        # shunt capacitor as negative Q
    add("611", "C", 0, -100)

    buses = [{"id": b, "phases": phases[b], "load": load[b]} for b in phases]
    dg = [
        {"id": "PV675", "bus": "675", "phases": "A", "kind": "PV", "P": [106.72, 149.53],
         "pf": 0.95, "lagging": True, "metered": False},
        {"id": "PV684", "bus": "684", "phases": "A", "kind": "PV", "P": [106.72, 149.53],
         "pf": 0.95, "lagging": True, "metered": True},
        {"id": "WTG680", "bus": "680", "phases": "ABC", "kind": "WTG", "P": [84.52, 103.31],
         "pf": 0.85, "lagging": True, "metered": False},
    ]
    notes = ("IEEE 13-node feeder reduced to series impedances: shunt line charging dropped, "
             "substation regulator omitted (slack setpoint represents it), XFM-1 as a series "
             "impedance, switch 671-692 as a zero-impedance branch, delta loads placed on one "
             "wye phase or split equally, capacitors as negative Q, all loads constant PQ.")
    return {"name": "ieee13", "notes": notes, "base_kV": base_kV, "base_MVA": base_MVA,
            "slack": "650", "impedance_units": "ohm", "buses": buses, "branches": branches, "dg": dg}


# ---------------------------------------------------------------- 123-bus
_S = [0.4576 + 1.0780j, 0.4666 + 1.0482j, 0.4615 + 1.0651j]
CFG123 = {
    1: ("ABC", sym([[_S[0], 0.1560 + 0.5017j, 0.1535 + 0.3849j], [_S[1], 0.1580 + 0.4236j], [_S[2]]])),
    2: ("ABC", sym([[_S[1], 0.1580 + 0.4236j, 0.1560 + 0.5017j], [_S[2], 0.1535 + 0.3849j], [_S[0]]])),
    3: ("ABC", sym([[_S[2], 0.1535 + 0.3849j, 0.1580 + 0.4236j], [_S[0], 0.1560 + 0.5017j], [_S[1]]])),
    4: ("ABC", sym([[_S[2], 0.1580 + 0.4236j, 0.1535 + 0.3849j], [_S[1], 0.1560 + 0.5017j], [_S[0]]])),
    5: ("ABC", sym([[_S[1], 0.1560 + 0.5017j, 0.1580 + 0.4236j], [_S[0], 0.1535 + 0.3849j], [_S[2]]])),
    6: ("ABC", sym([[_S[0], 0.1535 + 0.3849j, 0.1560 + 0.5017j], [_S[2], 0.1580 + 0.4236j], [_S[1]]])),
    7: ("AC", sym([[_S[0], 0.1535 + 0.3849j], [_S[2]]])),
    8: ("AB", sym([[_S[0], 0.1535 + 0.3849j], [_S[2]]])),
    9: ("A", sym([[1.3292 + 1.3475j]])),
    10: ("B", sym([[1.3292 + 1.3475j]])),
    11: ("C", sym([[1.3292 + 1.3475j]])),
    12: ("ABC", sym([[1.5209 + 0.7521j, 0.5198 + 0.2775j, 0.4924 + 0.2157j],
                     [1.5329 + 0.7162j, 0.5198 + 0.2775j], [1.5209 + 0.7521j]])),
}

LINES123 = """
1 2 175 10
1 3 250 11
1 7 300 1
3 4 200 11
3 5 325 11
5 6 250 11
7 8 200 1
8 12 225 10
8 9 225 9
8 13 300 1
9 14 425 9
13 34 150 11
13 18 825 2
14 11 250 9
14 10 250 9
15 16 375 11
15 17 350 11
18 19 250 9
18 21 300 2
19 20 325 9
21 22 525 10
21 23 250 2
23 24 550 11
23 25 275 2
25 26 350 7
25 28 200 2
26 27 275 7
26 31 225 11
27 33 500 9
28 29 300 2
29 30 350 2
30 250 200 2
31 32 300 11
34 15 100 11
35 36 650 8
35 40 250 1
36 37 300 9
36 38 250 10
38 39 325 10
40 41 325 11
40 42 250 1
42 43 500 10
42 44 200 1
44 45 200 9
44 47 250 1
45 46 300 9
47 48 150 4
47 49 250 4
49 50 250 4
50 51 250 4
52 53 200 1
53 54 125 1
54 55 275 1
54 57 350 3
55 56 275 1
57 58 250 10
57 60 750 3
58 59 250 10
60 61 550 5
60 62 250 12
62 63 175 12
63 64 350 12
64 65 425 12
65 66 325 12
67 68 200 9
67 72 275 3
67 97 250 3
68 69 275 9
69 70 325 9
70 71 275 9
72 73 275 11
72 76 200 3
73 74 350 11
74 75 400 11
76 77 400 6
76 86 700 3
77 78 100 6
78 79 225 6
78 80 475 6
80 81 475 6
81 82 250 6
81 84 675 11
82 83 250 6
84 85 475 11
86 87 450 6
87 88 175 9
87 89 275 6
89 90 225 10
89 91 225 6
91 92 300 11
91 93 225 6
93 94 275 9
93 95 300 6
95 96 200 10
97 98 275 3
98 99 550 3
99 100 300 3
100 450 800 3
101 102 225 11
101 105 275 3
102 103 325 11
103 104 700 11
105 106 225 10
105 108 325 3
106 107 575 10
108 109 450 9
108 300 1000 3
109 110 300 9
110 111 575 9
110 112 125 9
112 113 525 9
113 114 325 9
135 35 375 4
149 1 400 1
152 52 400 1
160 67 350 6
197 101 250 3
"""

LOADS123 = """
1 A 40 20
2 B 20 10
4 C 40 20
5 C 20 10
6 C 40 20
7 A 20 10
9 A 40 20
10 A 20 10
11 A 40 20
12 B 20 10
16 C 40 20
17 C 20 10
19 A 40 20
20 A 40 20
22 B 40 20
24 C 40 20
28 A 40 20
29 A 40 20
30 C 40 20
31 C 20 10
32 C 20 10
33 A 40 20
34 C 40 20
35 A 40 20
37 A 40 20
38 B 20 10
39 B 20 10
41 C 20 10
42 A 20 10
43 B 40 20
45 A 20 10
46 A 20 10
47 A 35 25
47 B 35 25
47 C 35 25
48 A 70 50
48 B 70 50
48 C 70 50
49 A 35 25
49 B 70 50
49 C 35 20
50 C 40 20
51 A 20 10
52 A 40 20
53 A 40 20
55 A 20 10
56 B 20 10
58 B 20 10
59 B 20 10
60 A 20 10
62 C 40 20
63 A 40 20
64 B 75 35
65 A 35 25
65 B 35 25
65 C 70 50
66 C 75 35
68 A 20 10
69 A 40 20
70 A 20 10
71 A 40 20
73 C 40 20
74 C 40 20
75 C 40 20
76 A 105 80
76 B 70 50
76 C 70 50
77 B 40 20
79 A 40 20
80 B 40 20
82 A 40 20
83 C 20 10
84 C 20 10
85 C 40 20
86 B 20 10
87 B 40 20
88 A 40 20
90 B 40 20
92 C 40 20
94 A 40 20
95 B 20 10
96 B 20 10
98 A 40 20
99 B 40 20
100 C 40 20
102 C 20 10
103 C 40 20
104 C 40 20
106 B 40 20
107 B 40 20
109 A 40 20
111 A 20 10
112 A 20 10
113 A 40 20
114 A 20 10
83 A 0 -200
83 B 0 -200
83 C 0 -200
88 A 0 -50
90 B 0 -50
92 C 0 -50
"""

# closed switches whose far node is merged into the near node
MERGE123 = {"152": "13", "135": "18", "160": "60", "197": "97"}


def ieee123():
    base_kV, base_MVA = 4.16, 5.0
    branches = []
    bus_ph = {}
    for ln in LINES123.split("\n"):
        if not ln.strip():
            continue
        a, b, ft, cfg = ln.split()
        a, b = MERGE123.get(a, a), MERGE123.get(b, b)
        ph, z = CFG123[int(cfg)]
        branches.append(branch(f"{a}-{b}", a, b, ph, embed(z, ph) * float(ft) / 5280.0))
        for n in (a, b):
            bus_ph.setdefault(n, set()).update(ph)
    # normally-open tie 151-300 closed so that bus 151 can host a DG unit
    branches.append(branch("300-151", "300", "151", "ABC", np.zeros((3, 3)), "switch"))
    bus_ph["151"] = set("ABC")
    load = {b: {} for b in bus_ph}
    for ln in LOADS123.split("\n"):
        if not ln.strip():
            continue
        b, ph, p, q = ln.split()
        cur = load[b].get(ph, [0.0, 0.0])
        load[b][ph] = [cur[0] + float(p), cur[1] + float(q)]
    order = sorted(bus_ph, key=lambda s: (int(s) if s.isdigit() else 10 ** 6, s))
    buses = [{"id": b, "phases": "".join(p for p in PH if p in bus_ph[b]), "load": load[b]} for b in order]
    pv = dict(kind="PV", P=[106.72, 149.53], pf=0.95, lagging=True, metered=False)
    wtg = dict(kind="WTG", P=[84.52, 103.31], pf=0.85, lagging=True, metered=False)
    dg = [
        dict(id="PV14", bus="14", phases="A", **pv),
        dict(id="WTG61", bus="61", phases="ABC", **wtg),
        dict(id="WTG151", bus="151", phases="ABC", **wtg),
        dict(id="WTG250", bus="250", phases="ABC", **wtg),
        dict(id="PV300", bus="300", phases="A", **pv),
        dict(id="PV450", bus="450", phases="A", **pv),
    ]
    notes = ("IEEE 123-node feeder reduced to series impedances: regulators omitted (slack "
             "setpoint represents the substation regulator), closed switches 13-152, 18-135, "
             "60-160, 97-197 merged into their near node, tie 300-151 closed as a zero-impedance "
             "branch, XFM-1 and bus 610 dropped, open ties ignored, delta loads placed on their "
             "first phase, capacitors as negative Q, all loads constant PQ. Bus 14 is single "
             "phase A in the line data, so the PV unit listed there is attached to phase A.")
    return {"name": "ieee123", "notes": notes, "base_kV": base_kV, "base_MVA": base_MVA,
            "slack": "149", "impedance_units": "ohm", "buses": buses, "branches": branches, "dg": dg}


# ---------------------------------------------------------------- toys
def toy2():
    return {"name": "toy2", "notes": "two-bus single-phase toy", "base_kV": 1.0, "base_MVA": 3.0,
            "slack": "1", "impedance_units": "pu",
            "buses": [{"id": "1", "phases": "A"}, {"id": "2", "phases": "A", "load": {"A": [100.0, 50.0]}}],
            "branches": [{"id": "1-2", "from": "1", "to": "2", "phases": "A", "r": [[0.01]], "x": [[0.02]]}],
            "dg": []}


def toy3():
    z = sym([[0.02 + 0.04j, 0.005 + 0.01j, 0.005 + 0.01j], [0.02 + 0.04j, 0.005 + 0.01j], [0.02 + 0.04j]])
    return {"name": "toy3", "notes": "three-bus three-phase chain", "base_kV": 1.0, "base_MVA": 3.0,
            "slack": "1", "impedance_units": "pu",
            "buses": [{"id": "1", "phases": "ABC"},
                      {"id": "2", "phases": "ABC", "load": {"A": [50, 20], "B": [40, 15], "C": [60, 25]}},
                      {"id": "3", "phases": "ABC", "load": {"A": [30, 10], "B": [35, 12], "C": [20, 8]}}],
            "branches": [branch("1-2", "1", "2", "ABC", z), branch("2-3", "2", "3", "ABC", z)],
            "dg": [{"id": "PV3", "bus": "3", "phases": "A", "kind": "PV", "P": [10.0, 20.0],
                    "pf": 0.95, "lagging": True, "metered": False}]}


def toy4():
    z = sym([[0.02 + 0.04j, 0.005 + 0.01j, 0.005 + 0.01j], [0.02 + 0.04j, 0.005 + 0.01j], [0.02 + 0.04j]])
    z1 = sym([[0.03 + 0.03j]])
    return {"name": "toy4", "notes": "four-bus feeder with a single-phase lateral", "base_kV": 1.0,
            "base_MVA": 3.0, "slack": "1", "impedance_units": "pu",
            "buses": [{"id": "1", "phases": "ABC"},
                      {"id": "2", "phases": "ABC", "load": {"A": [40, 20], "B": [40, 20], "C": [40, 20]}},
                      {"id": "3", "phases": "ABC", "load": {"A": [20, 10], "B": [30, 10], "C": [25, 10]}},
                      {"id": "4", "phases": "B", "load": {"B": [30, 12]}}],
            "branches": [branch("1-2", "1", "2", "ABC", z), branch("2-3", "2", "3", "ABC", z),
                         branch("2-4", "2", "4", "B", embed(z1, "B"))],
            "dg": [{"id": "WT3", "bus": "3", "phases": "ABC", "kind": "WTG", "P": [15.0, 30.0],
                    "pf": 0.85, "lagging": True, "metered": False},
                   {"id": "PV4", "bus": "4", "phases": "B", "kind": "PV", "P": [5.0, 10.0],
                    "pf": 0.95, "lagging": True, "metered": True}]}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for fn in (ieee13, ieee123, toy2, toy3, toy4):
        doc = fn()
        with open(OUT / f"{doc['name']}.json", "w") as fh:
            json.dump(doc, fh, indent=1)
        print(doc["name"], len(doc["buses"]), "buses", len(doc["branches"]), "branches")


if __name__ == "__main__":
    main()
