import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scopf import IslandingError
from scopf.cases import bundled_case, generate_synthetic
from scopf.grid import GridMatrices
from scopf.imml import (
    BranchOutage,
    ScreeningStats,
    contingency_angles,
    contingency_flows,
    contingency_inverse,
    contingency_ptdf,
    contingency_ptdf_row,
    direct_contingency_inverse,
    is_islanding,
    outage_denominator,
    screen_all,
    screen_contingency,
)

from _grids import chain, direct_angles, direct_flows, random_grid, single_branch, triangle

P_TRI = np.array([1.0, -1.0, 0.0])


def _tri():
    net = triangle()
    return net, GridMatrices.from_network(net), BranchOutage.of(net, 2)


def test_denominator_examples():
    net, mats, out = _tri()
    assert outage_denominator(mats.X, out) == pytest.approx(1 / 3)
    one = single_branch()
    assert outage_denominator(GridMatrices.from_network(one).X, BranchOutage.of(one, 0)) == pytest.approx(0.0, abs=1e-15)
    ch = chain(3)
    o = BranchOutage.of(ch, 1)
    assert is_islanding(outage_denominator(GridMatrices.from_network(ch).X, o), o)


def test_angles_triangle_outage():
    net, mats, out = _tri()
    theta_c = contingency_angles(mats.angles(P_TRI), mats.X, out)
    np.testing.assert_allclose(theta_c, [0.0, -1.0, 0.0], atol=1e-14)


def test_zero_flow_outage_leaves_angles_alone():
    net, mats, out = _tri()
    P = np.array([0.0, -1.0, -1.0])  # symmetric load: branch 2-3 idle
    theta = mats.angles(P)
    assert theta[1] == pytest.approx(theta[2])
    np.testing.assert_allclose(contingency_angles(theta, mats.X, out), theta, atol=1e-15)


def test_angles_refuse_islanding():
    one = single_branch()
    with pytest.raises(IslandingError):
        contingency_angles(np.zeros(2), GridMatrices.from_network(one).X, BranchOutage.of(one, 0))


def test_flows_triangle_outage():
    net, mats, out = _tri()
    theta_c = contingency_angles(mats.angles(P_TRI), mats.X, out)
    np.testing.assert_allclose(contingency_flows(mats.psi, mats.phi, theta_c, out), [1.0, 0.0, 0.0], atol=1e-14)
    np.testing.assert_array_equal(contingency_flows(mats.psi, mats.phi, np.zeros(3), out), 0.0)


def test_flows_zero_flow_outage_zeroes_only_outaged_entry():
    net, mats, out = _tri()
    theta = mats.angles(np.array([0.0, -1.0, -1.0]))
    F = mats.flows(theta)
    Fc = contingency_flows(mats.psi, mats.phi, theta, out)
    expected = F.copy()
    expected[2] = 0.0
    np.testing.assert_array_equal(Fc, expected)


def test_inverse_triangle_outage():
    net, mats, out = _tri()
    Xc = contingency_inverse(mats.X, out)
    np.testing.assert_allclose(Xc, [[0, 0, 0], [0, 1, 0], [0, 0, 1]], atol=1e-14)
    assert np.max(np.abs(Xc - Xc.T)) <= 1e-12


def test_inverse_degenerate_zero_delta():
    # both ends on the reference: delta is zero and X must come back unchanged
    X = np.zeros((2, 2))
    out = BranchOutage(branch=0, i=0, j=0, b=1.0)
    np.testing.assert_array_equal(contingency_inverse(X, out), X)


def test_ptdf_triangle_outage():
    net, mats, out = _tri()
    phi_c = contingency_ptdf(mats.psi, mats.phi, contingency_inverse(mats.X, out), out)
    assert phi_c[0] @ P_TRI == pytest.approx(1.0)
    np.testing.assert_array_equal(phi_c[2], 0.0)
    np.testing.assert_array_equal(phi_c[:, 0], 0.0)
    rng = np.random.default_rng(0)
    for _ in range(5):
        P = rng.normal(size=3)
        theta_c = contingency_angles(mats.angles(P), mats.X, out)
        np.testing.assert_allclose(phi_c @ P, contingency_flows(mats.psi, mats.phi, theta_c, out), atol=1e-12)


def test_ptdf_row_matches_full_matrix():
    rng = np.random.default_rng(3)
    net = random_grid(rng, 30, extra=20)
    mats = GridMatrices.from_network(net)
    for k in range(net.n_branches):
        out = BranchOutage.of(net, k)
        if is_islanding(outage_denominator(mats.X, out), out):
            continue
        full = contingency_ptdf(mats.psi, mats.phi, contingency_inverse(mats.X, out), out)
        for l in (0, net.n_branches // 2, k):
            np.testing.assert_allclose(contingency_ptdf_row(net, mats.X, out, l), full[l], atol=1e-10)


def _check_against_refactorization(net, rng):
    mats = GridMatrices.from_network(net)
    P = rng.normal(size=net.n_nodes)
    theta = mats.angles(P)
    worst = 0.0
    for k in range(net.n_branches):
        out = BranchOutage.of(net, k)
        if is_islanding(outage_denominator(mats.X, out), out):
            continue
        theta_c = contingency_angles(theta, mats.X, out)
        ref = direct_angles(net, k, P)
        worst = max(worst, np.max(np.abs(theta_c - ref)))
        worst = max(worst, np.max(np.abs(contingency_inverse(mats.X, out) - direct_contingency_inverse(net, k))))
        F = contingency_flows(mats.psi, mats.phi, theta_c, out)
        worst = max(worst, np.max(np.abs(F - direct_flows(net, k, ref))))
        assert F[k] == 0.0
    return worst


def test_imml_matches_refactorization_random_grids():
    rng = np.random.default_rng(2024)
    for _ in range(5):
        net = random_grid(rng, int(rng.integers(5, 41)), radial=0.2)
        assert _check_against_refactorization(net, rng) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(n=st.integers(3, 25), seed=st.integers(0, 2**31 - 1))
def test_imml_property(n, seed):
    rng = np.random.default_rng(seed)
    net = random_grid(rng, n, extra=int(rng.integers(1, n)))
    assert _check_against_refactorization(net, rng) <= 1e-9


def test_islanding_set_equals_bridges():
    rng = np.random.default_rng(9)
    for _ in range(5):
        net = random_grid(rng, 60, extra=15, radial=0.3)
        mats = GridMatrices.from_network(net)
        G = nx.MultiGraph()
        G.add_nodes_from(net.nodes)
        for k, br in enumerate(net.branches):
            G.add_edge(br.from_node, br.to_node, key=k)
        # a parallel circuit is never a bridge, so only single edges qualify
        oracle = set()
        for u, v in nx.bridges(nx.Graph(G)):
            ks = [k for k, br in enumerate(net.branches) if {br.from_node, br.to_node} == {u, v}]
            if len(ks) == 1:
                oracle.add(ks[0])
        found = {k for k in range(net.n_branches) if is_islanding(outage_denominator(mats.X, BranchOutage.of(net, k)), BranchOutage.of(net, k))}
        assert found == oracle


def test_screen_all_rts_has_one_islanding_outage():
    net = bundled_case("rts79")
    mats = GridMatrices.from_network(net)
    P = np.zeros(net.n_nodes)
    res = screen_all(net, mats, mats.angles(P))
    assert len(res) == net.n_branches
    islanding = [net.branch_label(r.outage.branch) for r in res if r.islanding]
    assert islanding == ["7-8"]


def test_screen_all_empty_set():
    net, mats, _ = _tri()
    assert screen_all(net, mats, mats.angles(P_TRI), contingencies=[]) == []


def test_screen_all_sorted_and_parallel_equal():
    net = generate_synthetic(40, 50, seed=4)
    mats = GridMatrices.from_network(net)
    P = net.injections(0.5 * net.gen_pmax * net.dem_p.sum() / net.gen_pmax.sum() * 2)
    theta = mats.angles(P)
    serial = screen_all(net, mats, theta, limits=0.3 * net.rate_lt)
    para = screen_all(net, mats, theta, limits=0.3 * net.rate_lt, parallel=True)
    assert [r.outage.branch for r in serial] == sorted(r.outage.branch for r in serial)
    for a, b in zip(serial, para):
        assert a.islanding == b.islanding
        np.testing.assert_array_equal(a.flows, b.flows)
        assert a.overloads == b.overloads


def test_lazy_ptdf_discipline():
    net = generate_synthetic(40, 50, seed=4)
    mats = GridMatrices.from_network(net)
    P = net.injections(net.gen_pmax * (net.dem_p.sum() / net.gen_pmax.sum()))
    theta = mats.angles(P)
    limits = 0.5 * net.rate_lt
    stats = ScreeningStats()
    res = screen_all(net, mats, theta, limits=limits, stats=stats)
    assert stats.ptdf_rows == 0 and not stats.ptdf_contingencies
    assert stats.fast_path + stats.island_inverses == net.n_branches

    stats = ScreeningStats()
    res = screen_all(net, mats, theta, limits=limits, with_rows=True, stats=stats)
    overloaded = {r.outage.branch for r in res if r.overloads}
    assert overloaded, "the test needs at least one overloaded outage"
    assert stats.ptdf_contingencies == overloaded
    assert stats.ptdf_rows == sum(len(r.overloads) for r in res)
    for r in res:
        assert set(r.ptdf_rows) == {ov.branch for ov in r.overloads}


def test_screen_contingency_overload_excess_positive():
    net, mats, _ = _tri()
    limits = np.full(3, 0.5)
    r = screen_contingency(net, mats, mats.angles(P_TRI), 2, limits)
    assert not r.islanding
    assert [ov.branch for ov in r.overloads] == [0]
    assert all(ov.excess > 0 for ov in r.overloads)
    assert r.flows[2] == 0.0


def test_screen_contingency_islanding_route():
    ch = chain(3)
    mats = GridMatrices.from_network(ch)
    P = np.array([1.0, 0.0, -1.0])
    r = screen_contingency(ch, mats, mats.angles(P), 1, np.full(2, 10.0), injections=P)
    assert r.islanding and r.theta_c is None
    assert r.blackout.nodes == (3,)
    np.testing.assert_allclose(r.flows, [0.0, 0.0], atol=1e-15)
