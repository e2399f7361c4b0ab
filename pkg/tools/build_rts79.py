"""Write the bundled RTS-79-style case to src/scopf/data/rts79.json.

Topology, reactances, loads and unit sizes follow the one-area IEEE
Reliability Test System (1979) as distributed with MATPOWER
(case24_ieee_rts): 24 buses, 38 branches including the parallel circuits
15-21, 18-21, 19-20 and 20-23. Everything is on a 100 MVA base.

Changes made for this artifact:

* Single linear cost per unit, in money per pu, grouped by unit type.
  Node 7's units are priced low so that node 7 exports as much as the 7-8
  link allows in the base case.
* Ratings: base and long-term limits are 80 % of rateA, the short-term
  limit is rateA. For branch 7-8 this gives 1.40 pu.
* Ramp rates left unset so the 1 % of rated power per minute default applies.
* Outage probability left unset (default per-branch value applies).

Run from the repository root::

    python tools/build_rts79.py
"""
from pathlib import Path

from scopf.cases import save_case
from scopf.network import Branch, Demand, Generator, Network

BASE = 100.0
VOLL = 1000.0

# from, to, reactance (pu), rateA (MW)
BRANCHES = [
    (1, 2, 0.0139, 175),
    (1, 3, 0.2112, 175),
    (1, 5, 0.0845, 175),
    (2, 4, 0.1267, 175),
    (2, 6, 0.1920, 175),
    (3, 9, 0.1190, 175),
    (3, 24, 0.0839, 400),
    (4, 9, 0.1037, 175),
    (5, 10, 0.0883, 175),
    (6, 10, 0.0605, 175),
    (7, 8, 0.0614, 175),
    (8, 9, 0.1651, 175),
    (8, 10, 0.1651, 175),
    (9, 11, 0.0839, 400),
    (9, 12, 0.0839, 400),
    (10, 11, 0.0839, 400),
    (10, 12, 0.0839, 400),
    (11, 13, 0.0476, 500),
    (11, 14, 0.0418, 500),
    (12, 13, 0.0476, 500),
    (12, 23, 0.0966, 500),
    (13, 23, 0.0865, 500),
    (14, 16, 0.0389, 500),
    (15, 16, 0.0173, 500),
    (15, 21, 0.0490, 500),
    (15, 21, 0.0490, 500),
    (15, 24, 0.0519, 500),
    (16, 17, 0.0259, 500),
    (16, 19, 0.0231, 500),
    (17, 18, 0.0144, 500),
    (17, 22, 0.1053, 500),
    (18, 21, 0.0259, 500),
    (18, 21, 0.0259, 500),
    (19, 20, 0.0396, 500),
    (19, 20, 0.0396, 500),
    (20, 23, 0.0216, 500),
    (20, 23, 0.0216, 500),
    (21, 22, 0.0678, 500),
]

LT_SHARE = 0.8  # base and long-term limit as a share of rateA

LOADS = {1: 108, 2: 97, 3: 180, 4: 74, 5: 71, 6: 136, 7: 125, 8: 171, 9: 175, 10: 195,
         13: 265, 14: 194, 15: 317, 16: 100, 18: 333, 19: 181, 20: 128}

# node, unit size (MW), cost (money per pu)
UNITS = (
    [(1, 20, 40.0)] * 2 + [(1, 76, 14.0)] * 2
    + [(2, 20, 40.0)] * 2 + [(2, 76, 14.0)] * 2
    + [(7, 100, 4.0)] * 3
    + [(13, 197, 25.0)] * 3
    + [(15, 12, 30.0)] * 5 + [(15, 155, 12.0)]
    + [(16, 155, 12.0)]
    + [(18, 400, 5.0)]
    + [(21, 400, 5.0)]
    + [(22, 50, 1.0)] * 6
    + [(23, 155, 12.0)] * 2 + [(23, 350, 10.0)]
)

NOTES = (
    "IEEE RTS-79 one-area topology, reactances, loads and unit sizes (MATPOWER case24_ieee_rts); "
    "linear unit costs by unit type with node 7 priced low; base and long-term ratings 80% of rateA, "
    "short-term rating rateA; ramp and outage probability "
    "left to the solver defaults; voll 1000 per pu. Built by tools/build_rts79.py."
)


def build() -> Network:
    branches = []
    for k, (i, j, x, ra) in enumerate(BRANCHES, 1):
        lt = round(LT_SHARE * ra / BASE, 6)
        branches.append(Branch(k, i, j, 1.0 / x, ra / BASE, lt, lt))
    gens = [Generator(k, n, mw / BASE, cost) for k, (n, mw, cost) in enumerate(UNITS, 1)]
    dems = [Demand(k, n, mw / BASE, VOLL) for k, (n, mw) in enumerate(sorted(LOADS.items()), 1)]
    return Network(tuple(range(1, 25)), tuple(branches), tuple(gens), tuple(dems), ref=13, base_mva=BASE,
                   name="rts79", meta={"notes": NOTES})


if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "src" / "scopf" / "data" / "rts79.json"
    save_case(build(), out)
    print(f"wrote {out}")
