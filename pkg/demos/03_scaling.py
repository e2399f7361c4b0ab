"""
How the two methods scale
=========================

Seeded synthetic grids of growing size, each solved by Benders
decomposition and by the extensive form. The extensive LP grows with the
number of outages times the grid size, while the decomposition only adds
what screening finds, so the gap in run time widens with size.

Run with ``python demos/03_scaling.py [largest-size]``. The default stops
at 200 nodes; 500 takes a few minutes, mostly in the extensive form.
"""

# %%
import sys

from scopf.cases import generate_synthetic
from scopf.solver import solve_benders, solve_extensive

largest = int(sys.argv[1]) if len(sys.argv) > 1 else 200
sizes = [n for n in (50, 100, 200, 300, 500) if n <= largest]

# %%
print(f"{'nodes':>5} {'branches':>8} {'islanding':>9} {'cuts':>5} {'benders [s]':>11} {'extensive [s]':>13} {'ratio':>6} {'gap':>8}")
for n in sizes:
    net = generate_synthetic(n, int(round(n * 1.194)), seed=1)
    b = solve_benders(net)
    e = solve_extensive(net)
    tb, te = b.timing["total"], e.timing["total"]
    gap = abs(b.objective - e.objective) / abs(e.objective)
    print(f"{n:5d} {net.n_branches:8d} {len(b.islanding):9d} {len(b.cut_log):5d} {tb:11.2f} {te:13.2f} {tb / te:6.3f} {gap:8.1e}")
    # the extensive model is large; drop it before the next size
    e.extras.clear()
    b.extras.clear()

# %%
# Where the decomposition spends its time on the largest grid: LP solves
# versus flow and PTDF work in screening.
t = b.timing
print(f"\nlargest grid: solver {100 * t['solver'] / t['total']:.0f} %, "
      f"flow/PTDF {100 * t['flow_ptdf'] / t['total']:.0f} % of {t['total']:.2f} s over {t['solves']} LP solves")
