import networkx as nx
import numpy as np
import pytest

from scopf import IslandingError
from scopf.cases import bundled_case
from scopf.islanding import (
    ReferenceIsland,
    find_islands,
    find_islands_traversal,
    island_state,
    reference_island_subsystem,
)
from scopf.network import Demand, Generator, Network

from _grids import branch, chain, direct_flows, random_grid, single_branch, triangle


def _groups(network, partition):
    ids = np.asarray(network.nodes)
    return sorted(sorted(int(ids[p]) for p in members) for members in partition.islands.values())


def _nx_groups(network, outaged):
    G = nx.Graph()
    G.add_nodes_from(network.nodes)
    for k, br in enumerate(network.branches):
        if k not in outaged:
            G.add_edge(br.from_node, br.to_node)
    return sorted(sorted(c) for c in nx.connected_components(G))


def test_triangle_outage_keeps_one_island():
    part = find_islands(triangle(), [2])
    assert part.count == 1
    assert part.reference_mask().all()


def test_single_branch_outage_splits_in_two():
    net = single_branch()
    part = find_islands(net, [0])
    assert part.count == 2
    np.testing.assert_array_equal(part.labels, [1, 2])
    assert part.ref_label == 1


def test_labels_are_smallest_node_id():
    part = find_islands(chain(5), [1])
    np.testing.assert_array_equal(part.labels, [1, 1, 3, 3, 3])


def test_rts_outage_of_7_8_isolates_node_7():
    net = bundled_case("rts79")
    k = [net.branch_label(p) for p in range(net.n_branches)].index("7-8")
    part = find_islands(net, [k])
    assert part.count == 2
    lost = [net.nodes[p] for p in np.flatnonzero(~part.reference_mask())]
    assert lost == [7]


def test_no_outage_is_connected():
    net = bundled_case("rts79")
    assert find_islands(net).count == 1


def test_propagation_matches_networkx_components():
    rng = np.random.default_rng(31)
    for _ in range(50):
        n = int(rng.integers(2, 60))
        net = random_grid(rng, n, extra=int(rng.integers(0, n)), radial=0.3)
        outaged = sorted(set(int(k) for k in rng.choice(net.n_branches, size=int(rng.integers(0, 4)))))
        part = find_islands(net, outaged)
        assert _groups(net, part) == _nx_groups(net, outaged)
        np.testing.assert_array_equal(part.labels, find_islands_traversal(net, outaged).labels)


def test_chain_blackout_account():
    net = Network(
        (1, 2, 3),
        (branch(1, 1, 2), branch(2, 2, 3)),
        (Generator(1, 1, 5.0, 10.0), Generator(2, 3, 0.4, 10.0)),
        (Demand(1, 2, 0.5, 1000.0), Demand(2, 3, 0.7, 1000.0)),
        ref=1,
    )
    island = ReferenceIsland(net, [1])
    assert island.lost_nodes == (3,)
    acc = island.blackout(pg=np.array([1.0, 0.3]))
    assert acc.lost_demand == pytest.approx(0.7)
    assert acc.lost_generation == pytest.approx(0.3)
    assert acc.demands == (1,) and acc.generators == (1,)
    acc = island.blackout(pg=np.array([1.0, 0.3]), shed=np.array([0.0, 0.2]))
    assert acc.lost_demand == pytest.approx(0.5)


def test_reference_island_flows_against_oracle():
    # chain 1-2-3 plus triangle on 3-4-5 hung off node 3, cut 1-2 leaves node 1 out
    net = Network(
        (1, 2, 3, 4, 5),
        (branch(1, 1, 2, 2.0), branch(2, 2, 3, 3.0), branch(3, 3, 4), branch(4, 4, 5, 4.0), branch(5, 3, 5, 5.0)),
        ref=3,
    )
    island = ReferenceIsland(net, [0])
    assert island.lost_nodes == (1,)
    P = np.array([9.0, 0.4, 0.0, -0.1, -0.3])
    F = island.flows(P)
    keep = [1, 2, 3, 4]
    sub = Network((2, 3, 4, 5), tuple(net.branches[1:]), ref=3)
    Psub = P[keep].copy()
    Psub[1] -= Psub.sum()
    from _grids import direct_angles

    expected = direct_flows(sub, None, direct_angles(sub, None, Psub))
    np.testing.assert_allclose(F[1:], expected, atol=1e-12)
    assert F[0] == 0.0
    full = island.ptdf()
    np.testing.assert_allclose(full @ P, F, atol=1e-12)
    for k in range(net.n_branches):
        np.testing.assert_allclose(island.ptdf_row(k), full[k], atol=1e-14)


def test_island_state_wraps_reference_island():
    net = chain(3)
    st = island_state(net, [1], np.array([1.0, -1.0, 0.0]))
    np.testing.assert_allclose(st.flows_full, [1.0, 0.0], atol=1e-14)
    assert st.blackout.nodes == (3,)


def test_reference_island_subsystem():
    net = Network(
        (1, 2, 3),
        (branch(1, 1, 2), branch(2, 2, 3)),
        (Generator(1, 1, 5.0, 10.0),),
        (Demand(1, 3, 0.7, 1000.0),),
        ref=1,
    )
    part = find_islands(net, [1])
    sub, acc = reference_island_subsystem(net, part, [1])
    assert sub.nodes == (1, 2)
    assert sub.n_branches == 1
    assert acc.lost_demand == pytest.approx(0.7)


def test_reference_island_subsystem_errors():
    net = chain(3)
    with pytest.raises(ValueError):
        reference_island_subsystem(net, find_islands(net), [])
    # all generation sits outside the reference island
    net = Network((1, 2), (branch(1, 1, 2),), (Generator(1, 2, 1.0, 1.0),), ref=1)
    with pytest.raises(IslandingError):
        reference_island_subsystem(net, find_islands(net, [0]), [0])


def test_blackout_with_empty_lost_side():
    net = Network((1, 2), (branch(1, 1, 2),), (Generator(1, 1, 1.0, 1.0),), ref=1)
    acc = ReferenceIsland(net, [0]).blackout()
    assert acc.lost_demand == 0.0 and acc.lost_generation == 0.0
    assert not acc.empty
