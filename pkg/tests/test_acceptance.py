"""End-to-end acceptance gates, one test per criterion.

Each test records a one-line verdict that the terminal summary prints
under "acceptance criteria", then asserts it.
"""
import logging
import statistics
import time

import networkx as nx
import numpy as np
import pytest

from conftest import ACCEPTANCE
from scopf.cases import bundled_case, generate_synthetic
from scopf.grid import GridMatrices
from scopf.imml import (
    BranchOutage,
    contingency_angles,
    contingency_inverse,
    contingency_ptdf,
    direct_contingency_inverse,
    is_islanding,
    outage_denominator,
)
from scopf.report import format_json, format_text
from scopf.solver import solve_benders, solve_extensive, verify_solution
from scopf.solver.formulation import ST, pass_guard, ScopfOptions

from _grids import direct_angles, direct_flows, random_grid

log = logging.getLogger(__name__)

# ten seeded synthetic cases with at most 100 nodes
SMALL_CASES = [(20 + 8 * s, int(round((20 + 8 * s) * 1.2)), s) for s in range(10)]
BIG_CASE = (500, 597, 1)


def gate(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    assert ok, f"criterion {n}: {detail}"


def _networks():
    yield bundled_case("rts79")
    for n, b, seed in SMALL_CASES:
        yield generate_synthetic(n, b, seed=seed)


def _criterion1_run():
    """Both methods on every small case; returns rows of (network, benders, extensive)."""
    rows = []
    t0 = time.perf_counter()
    for net in _networks():
        b = solve_benders(net)
        e = solve_extensive(net)
        b.extras.clear()
        e.extras.clear()
        rows.append((net, b, e))
    return rows, time.perf_counter() - t0


def _reports(rows):
    return [format_text(net, s) + format_json(net, s) for net, b, e in rows for s in (b, e)]


@pytest.fixture(scope="module")
def small_runs():
    return _criterion1_run()


@pytest.fixture(scope="module")
def big_case():
    return generate_synthetic(*BIG_CASE[:2], seed=BIG_CASE[2])


@pytest.fixture(scope="module")
def big_runs(big_case):
    t0 = time.perf_counter()
    b = solve_benders(big_case)
    tb = time.perf_counter() - t0
    b.extras.clear()
    t0 = time.perf_counter()
    e = solve_extensive(big_case)
    te = time.perf_counter() - t0
    e.extras.clear()
    return b, tb, e, te


def _label(net, k):
    return net.branch_label(k)


def test_criterion_1_method_equivalence(small_runs):
    rows, elapsed = small_runs
    gaps = [abs(b.objective - e.objective) / abs(e.objective) for _, b, e in rows]
    worst = max(gaps)
    gate(1, worst <= 1e-6 and elapsed < 60.0,
         f"{len(rows)} cases, worst relative gap {worst:.1e} (<= 1e-6), {elapsed:.1f} s (< 60 s)")


def test_criterion_2_imml_against_refactorization():
    rng = np.random.default_rng(20)
    t0 = time.perf_counter()
    worst = 0.0
    checked = 0
    for _ in range(20):
        n = int(rng.integers(10, 101))
        net = random_grid(rng, n, extra=int(rng.integers(n // 4, n)), radial=0.15)
        mats = GridMatrices.from_network(net)
        P = rng.normal(size=n)
        theta = mats.angles(P)
        for k in range(net.n_branches):
            out = BranchOutage.of(net, k)
            if is_islanding(outage_denominator(mats.X, out), out):
                continue
            theta_c = contingency_angles(theta, mats.X, out)
            ref_theta = direct_angles(net, k, P)
            X_c = contingency_inverse(mats.X, out)
            F_c = net.susceptance * (theta_c[net.br_from] - theta_c[net.br_to])
            F_c[k] = 0.0
            worst = max(
                worst,
                float(np.max(np.abs(theta_c - ref_theta))),
                float(np.max(np.abs(X_c - direct_contingency_inverse(net, k)))),
                float(np.max(np.abs(F_c - direct_flows(net, k, ref_theta)))),
            )
            checked += 1
    elapsed = time.perf_counter() - t0
    gate(2, worst <= 1e-9 and elapsed < 30.0,
         f"{checked} outages on 20 grids, worst deviation {worst:.1e} (<= 1e-9), {elapsed:.1f} s (< 30 s)")


def _bridge_count(net):
    G = nx.MultiGraph()
    G.add_nodes_from(net.nodes)
    for br in net.branches:
        G.add_edge(br.from_node, br.to_node)
    return sum(1 for u, v in nx.bridges(nx.Graph(G)) if G.number_of_edges(u, v) == 1)


def test_criterion_3_islanding_census(small_runs, big_case):
    rows, _ = small_runs
    rts, rts_b, _ = rows[0]
    mismatches = []
    for net, b, _ in rows[1:] + [(big_case, None, None)]:
        mats = GridMatrices.from_network(net)
        count = sum(
            is_islanding(outage_denominator(mats.X, BranchOutage.of(net, k)), BranchOutage.of(net, k))
            for k in range(net.n_branches)
        )
        if b is not None:
            assert len(b.islanding) == count
        if count != _bridge_count(net):
            mismatches.append(net.name)
    gate(3, len(rts_b.islanding) == 1 and not mismatches,
         f"rts79 islanding outages {len(rts_b.islanding)} (== 1), "
         f"{len(rows)} synthetic grids match the bridge finder: {not mismatches}")


def test_criterion_4_convergence_profile(small_runs):
    rows, _ = small_runs
    rts, b, _ = rows[0]
    second = {r.branch for r in b.cut_log if r.iteration == 2}
    guard_hit = [net.name for net, s, _ in rows if s.sweeps > pass_guard(net, ScopfOptions())]
    if b.passes == 3:
        log.warning("rts79 needed 3 passes; accepted under the tolerance clause")
    gate(4, b.passes <= 3 and second == {"7-8"} and not guard_hit,
         f"rts79 passes {b.passes} (2 expected, <= 3 accepted), pass-2 cuts at {sorted(second)}, "
         f"pass guard reached on {guard_hit or 'no case'}")


def test_criterion_5_node_7_recourse(small_runs):
    rows, _ = small_runs
    rts, b, e = rows[0]
    k = [_label(rts, p) for p in range(rts.n_branches)].index("7-8")
    got = [s.node_changes(rts, k, ST)[7] for s in (b, e)]
    err = max(abs(g + 1.40) for g in got)
    gate(5, err <= 1e-4, f"short-term change at node 7: benders {got[0]:.4f}, extensive {got[1]:.4f} (-1.40 +/- 1e-4)")


def test_criterion_6_fast_path_speedup(big_case):
    net = big_case
    mats = GridMatrices.from_network(net)
    theta = mats.angles(net.injections(net.gen_pmax * (net.dem_p.sum() / net.gen_pmax.sum())))
    outs = []
    for k in range(net.n_branches):
        out = BranchOutage.of(net, k)
        if not is_islanding(outage_denominator(mats.X, out), out):
            outs.append(out)
    rng = np.random.default_rng(6)
    sample = [outs[i] for i in rng.choice(len(outs), size=40, replace=False)]

    def timed(fn, reps):
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        return (time.perf_counter() - t0) / reps

    fast, full = [], []
    for out in sample:
        fast.append(timed(lambda: contingency_angles(theta, mats.X, out), 200))
        full.append(timed(lambda: contingency_ptdf(mats.psi, mats.phi, contingency_inverse(mats.X, out), out), 3))
    ratio = statistics.median(full) / statistics.median(fast)
    gate(6, ratio >= 10.0,
         f"median angle update {statistics.median(fast) * 1e6:.1f} us vs full PTDF {statistics.median(full) * 1e3:.2f} ms, "
         f"speedup {ratio:.0f}x (>= 10x)")


def test_criterion_7_end_to_end_ordering(big_runs):
    b, tb, e, te = big_runs
    gap = abs(b.objective - e.objective) / abs(e.objective)
    gate(7, tb <= 0.5 * te and tb + te < 600.0 and gap <= 1e-6,
         f"500 nodes: benders {tb:.1f} s, extensive {te:.1f} s, ratio {tb / te:.3f} (<= 0.5), "
         f"cost gap {gap:.1e}, total {tb + te:.0f} s (< 600 s)")


def test_criterion_8_verifier_gate(small_runs, big_case, big_runs):
    rows, _ = small_runs
    checked = []
    for net, b, e in rows:
        checked += [(net, b), (net, e)]
    checked += [(big_case, big_runs[0]), (big_case, big_runs[2])]
    bad = []
    for net, sol in checked:
        report = verify_solution(net, sol, tol=1e-6)
        if not report.ok:
            bad.append(f"{net.name}/{sol.method}")
    gate(8, not bad, f"{len(checked)} solutions verified, failures: {bad or 'none'}")


def test_criterion_9_determinism(small_runs):
    first = _reports(small_runs[0])
    second_rows, _ = _criterion1_run()
    second = _reports(second_rows)
    same = sum(a == b for a, b in zip(first, second))
    gate(9, same == len(first) == len(second), f"{same}/{len(first)} reports byte-identical across two runs")
