"""
Screening single-branch outages with rank-one updates
=====================================================

A walk through the screening layer: how the post-outage angles come out of
the base-case reduced inverse without refactorizing, how an outage that
splits the grid is recognised, and why the full post-outage PTDF is only
worth building for the branches that actually overload.

Run with ``python demos/01_outage_screening.py``.
"""

# %%
import time

import numpy as np

from scopf import Branch, Network
from scopf.cases import bundled_case
from scopf.grid import GridMatrices
from scopf.imml import (
    BranchOutage,
    contingency_angles,
    contingency_inverse,
    contingency_ptdf,
    is_islanding,
    outage_denominator,
    screen_all,
)
from scopf.solver import build_base_opf

# %%
# A unit triangle, 1 pu injected at node 1 and taken out at node 2.
tri = Network((1, 2, 3), [Branch(k + 1, i, j, 1.0, 2.0, 1.0, 1.0) for k, (i, j) in enumerate([(1, 2), (1, 3), (2, 3)])], ref=1)
mats = GridMatrices.from_network(tri)
P = np.array([1.0, -1.0, 0.0])
theta = mats.angles(P)
print("base angles     ", np.round(theta, 4))
print("base flows      ", np.round(mats.flows(theta), 4))

# %%
# Take out 2-3. The denominator x - (X_ii + X_jj - 2 X_ij) is 1/3 here, well
# away from zero, so the grid stays connected and the update is one axpy.
out = BranchOutage.of(tri, 2)
print("denominator     ", round(outage_denominator(mats.X, out), 6))
theta_c = contingency_angles(theta, mats.X, out)
print("post-outage angles", np.round(theta_c, 4))

# %%
# The same outage through the full route: updated inverse, then the PTDF.
X_c = contingency_inverse(mats.X, out)
phi_c = contingency_ptdf(mats.psi, mats.phi, X_c, out)
print("PTDF route flows", np.round(phi_c @ P, 4))

# %%
# On the bundled 24-node case only one outage splits the grid: 7-8 leaves
# node 7 on its own. Its denominator is zero up to round-off.
rts = bundled_case("rts79")
rmats = GridMatrices.from_network(rts)
for k in range(rts.n_branches):
    o = BranchOutage.of(rts, k)
    d = outage_denominator(rmats.X, o)
    if is_islanding(d, o):
        print(f"outage {rts.branch_label(k)} separates the grid (d = {d:.1e})")

# %%
# Screen every outage against the cheapest dispatch that ignores outages,
# at the long-term ratings. Only overloaded branches get PTDF rows.
opf = build_base_opf(rts)
opf.solve()
Pr = rts.injections(opf.pg, opf.shed)
results = screen_all(rts, rmats, rmats.angles(Pr), limits=rts.rate_lt, injections=Pr, with_rows=True)
rows = sum(len(r.ptdf_rows) for r in results)
print(f"{len(results)} outages, {sum(bool(r.overloads) for r in results)} with overloads, {rows} PTDF rows built")

# %%
# What the lazy discipline buys: time one angle update against one full
# post-outage PTDF on the same outage. The angle update is O(N) and the PTDF
# O(B N^2), so on 24 nodes the gap is modest; at 500 nodes it is three
# orders of magnitude (see the acceptance suite).
o = BranchOutage.of(rts, 0)
th = rmats.angles(Pr)
t0 = time.perf_counter()
for _ in range(2000):
    contingency_angles(th, rmats.X, o)
fast = (time.perf_counter() - t0) / 2000
t0 = time.perf_counter()
for _ in range(200):
    contingency_ptdf(rmats.psi, rmats.phi, contingency_inverse(rmats.X, o), o)
full = (time.perf_counter() - t0) / 200
print(f"angle update {fast * 1e6:.1f} us, full PTDF {full * 1e6:.1f} us ({full / fast:.0f}x)")
