import dataclasses

import numpy as np
import pytest

from scopf import InfeasibleError
from scopf.cases import bundled_case, generate_synthetic
from scopf.network import Branch, Demand, Generator, Network
from scopf.solver import (
    ScopfOptions,
    build_base_opf,
    build_extensive,
    solve_benders,
    solve_extensive,
    verify_solution,
)
from scopf.solver.formulation import LONG_TERM, LT, PREVENTIVE, SHORT_TERM, ST

from _grids import two_node


@pytest.fixture(scope="module")
def rts():
    return bundled_case("rts79")


@pytest.fixture(scope="module")
def rts_benders(rts):
    return solve_benders(rts)


@pytest.fixture(scope="module")
def rts_extensive(rts):
    return solve_extensive(rts)


def _label_pos(net, label):
    return [net.branch_label(k) for k in range(net.n_branches)].index(label)


# -- base case -----------------------------------------------------------------


def test_base_opf_two_node():
    main = build_base_opf(two_node())
    assert main.solve() == pytest.approx(10.0)
    np.testing.assert_allclose(main.pg, [1.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(main.shed, [0.0], atol=1e-9)


def test_base_opf_respects_base_rating():
    # each line carries half; a 0.3 rating on both forces 0.4 pu from the dear unit
    main = build_base_opf(two_node(line=0.3))
    assert main.solve() == pytest.approx(10 * 0.6 + 50 * 0.4)


def test_base_opf_zero_demand():
    net = Network((1, 2), (Branch(1, 1, 2, 10.0, 1.0, 1.0, 1.0),), (Generator(1, 1, 2.0, 10.0),), ref=1)
    main = build_base_opf(net)
    assert main.solve() == pytest.approx(0.0)


def test_base_opf_sheds_when_generation_short():
    net = Network(
        (1, 2),
        (Branch(1, 1, 2, 10.0, 5.0, 5.0, 5.0),),
        (Generator(1, 1, 0.5, 10.0),),
        (Demand(1, 2, 1.0, 1000.0),),
        ref=1,
    )
    main = build_base_opf(net)
    assert main.solve() == pytest.approx(5.0 + 500.0)
    assert main.shed[0] == pytest.approx(0.5)


# -- cuts ------------------------------------------------------------------------


def test_make_cut_senses_and_errors():
    net = two_node()
    main = build_base_opf(net)
    main.solve()
    row = np.array([0.0, -1.0])  # the surviving line carries all of node 2
    up = main.make_cut(0, PREVENTIVE, 1, 1.0, 0.8, row)
    assert up.sense == "<=" and up.overload == pytest.approx(0.2)
    down = main.make_cut(0, PREVENTIVE, 1, -1.0, 0.8, -row)
    assert down.sense == ">="
    # the flow at the incumbent is the cut activity plus the demand constant
    assert up.violation(main.x) == pytest.approx(0.2)
    assert down.violation(main.x) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        main.make_cut(0, PREVENTIVE, 1, 0.5, 0.8, row)
    with pytest.raises(ValueError):
        main.make_cut(0, "sideways", 1, 1.0, 0.8, row)
    dead = main.make_cut(0, PREVENTIVE, 1, 1.0, 0.8, np.zeros(2))
    assert dead.infeasible
    with pytest.raises(InfeasibleError) as info:
        main.add_cut(dead)
    assert list(info.value.cuts) == [dead]


def test_corrective_cut_registers_recourse():
    net = two_node()
    main = build_base_opf(net)
    main.solve()
    cut = main.make_cut(0, LONG_TERM, 1, 1.0, 0.8, np.array([0.0, -0.5]))
    assert main.is_registered(0, LT) and not main.is_registered(0, ST)
    sv = main.states[0][LT]
    # the reference-node unit has zero weight; the dear unit at node 2 enters both ways
    assert {int(sv.gen_up[1]), int(sv.gen_dn[1])} <= set(cut.idx.tolist())
    assert int(sv.gen_up[0]) not in cut.idx
    main.make_cut(1, SHORT_TERM, 0, 1.0, 0.8, np.array([0.0, -0.5]))
    assert main.is_registered(1, ST)


def _islanding_pair(prob):
    return Network(
        (1, 2),
        (Branch(1, 1, 2, 10.0, 5.0, 5.0, 5.0, prob),),
        (Generator(1, 1, 10.0, 10.0),),
        (Demand(1, 2, 1.0, 100.0),),
        ref=1,
    )


def test_extend_objective_charges_blackout_once():
    main = build_base_opf(_islanding_pair(0.01))
    assert main.solve() == pytest.approx(10.0)
    main.extend_objective(0, LT)
    assert main.solve() == pytest.approx(11.0)
    n = main.model.n_vars
    main.extend_objective(0, LT)
    main.extend_objective(0, ST)
    assert main.solve() == pytest.approx(11.0)
    main.extend_objective(0, ST)
    assert main.model.n_vars > n


def test_extend_objective_zero_probability():
    main = build_base_opf(_islanding_pair(0.0))
    main.solve()
    main.extend_objective(0, LT)
    assert main.solve() == pytest.approx(10.0)


# -- two-node analytic cases ---------------------------------------------------------


@pytest.mark.parametrize("solver", [solve_benders, solve_extensive])
def test_two_node_corrective_redispatch(solver):
    # either outage leaves 1 pu on a 0.8 line: 0.2 pu shifts to the dear unit afterwards
    sol = solver(two_node())
    assert sol.objective == pytest.approx(10.0 + 2 * 1e-4 * 50 * 0.2, rel=1e-9)
    np.testing.assert_allclose(sol.pg, [1.0, 0.0], atol=1e-9)
    for k in (0, 1):
        np.testing.assert_allclose(sol.actions[k].lt_gen, [-0.2, 0.2], atol=1e-9)
        np.testing.assert_allclose(sol.actions[k].st_gen, [0.0, 0.0], atol=1e-9)


@pytest.mark.parametrize("solver", [solve_benders, solve_extensive])
def test_two_node_ramp_bound_forces_shedding(solver):
    # the dear unit can only add 0.1 pu; the other 0.1 pu is shed at voll
    sol = solver(two_node(ramp_b=0.1 / 15))
    assert sol.objective == pytest.approx(10.0 + 2 * 1e-4 * (50 * 0.1 + 1000 * 0.1), rel=1e-9)
    for k in (0, 1):
        assert sol.actions[k].lt_shed[0] == pytest.approx(0.1)


def test_two_node_short_term_overload_is_corrected_in_short_term():
    # a 0.9 short-term rating needs 0.1 pu of immediate relief: only shedding can do it
    sol = solve_benders(two_node(st=0.9))
    assert {r.kind for r in sol.cut_log} >= {SHORT_TERM}
    for k in (0, 1):
        assert sol.actions[k].st_shed[0] == pytest.approx(0.1)
    ext = solve_extensive(two_node(st=0.9))
    assert sol.objective == pytest.approx(ext.objective, rel=1e-9)


def test_empty_contingency_set_is_base_opf():
    net = two_node()
    sol = solve_benders(net, contingencies=[])
    assert sol.objective == pytest.approx(10.0)
    assert sol.cut_log == [] and sol.passes == 0
    assert solve_extensive(net, contingencies=[]).objective == pytest.approx(10.0)


# -- the bundled reliability test system -------------------------------------------------


def test_rts_benders_cut_log(rts_benders):
    sol = rts_benders
    assert sol.passes == 2
    first = [r for r in sol.cut_log if r.iteration == 1]
    second = [r for r in sol.cut_log if r.iteration == 2]
    assert (first[0].contingency, first[0].branch) == ("3-24", "14-16")
    assert first[0].overload == pytest.approx(0.7391, abs=5e-5)
    assert {r.branch for r in second} == {"7-8"}
    assert len(sol.islanding) == 1


def test_rts_methods_agree(rts, rts_benders, rts_extensive):
    # the optimum is degenerate, so only the cost and the forced node-7 action must match
    assert rts_benders.objective == pytest.approx(rts_extensive.objective, rel=1e-9)
    k = _label_pos(rts, "7-8")
    for sol in (rts_benders, rts_extensive):
        assert sol.node_changes(rts, k, ST)[7] == pytest.approx(-1.40, abs=1e-4)


def test_rts_history_is_monotone(rts_benders):
    h = np.array(rts_benders.objective_history)
    assert np.all(np.diff(h) >= -1e-9 * abs(h[-1]))
    assert h[-1] == pytest.approx(rts_benders.objective)


def test_rts_final_incumbent_satisfies_every_cut(rts_benders):
    main = rts_benders.extras["main"]
    assert len(main.cuts) == len(rts_benders.cut_log)
    assert max(c.violation(main.x) for c in main.cuts) <= 1e-7


@pytest.mark.parametrize("which", ["benders", "extensive"])
def test_rts_solutions_verify(rts, rts_benders, rts_extensive, which):
    sol = rts_benders if which == "benders" else rts_extensive
    report = verify_solution(rts, sol)
    assert report.ok, report.summary()
    assert report.flow_agreement <= 1e-9


def test_parallel_screening_reaches_same_optimum(rts, rts_benders):
    sol = solve_benders(rts, options=ScopfOptions(parallel=True))
    assert sol.objective == pytest.approx(rts_benders.objective, rel=1e-9)
    assert verify_solution(rts, sol).ok


def test_preventive_only_mode(rts, rts_benders):
    opts = ScopfOptions(corrective=False)
    sol = solve_benders(rts, options=opts)
    isl = set(sol.islanding)
    assert all(r.kind == PREVENTIVE for r in sol.cut_log if r.contingency_index not in isl)
    assert sol.objective >= rts_benders.objective - 1e-9
    assert sol.objective == pytest.approx(solve_extensive(rts, options=opts).objective, rel=1e-9)
    assert verify_solution(rts, sol, options=opts).ok
    # the corrective plan uses recourse that preventive mode forbids
    assert not verify_solution(rts, rts_benders, options=opts).ok


def test_synthetic_methods_agree():
    net = generate_synthetic(60, 75, seed=3)
    b = solve_benders(net)
    e = solve_extensive(net)
    assert b.objective == pytest.approx(e.objective, rel=1e-6)
    assert verify_solution(net, b).ok and verify_solution(net, e).ok


def test_build_extensive_carries_start_basis(rts):
    model, base, states = build_extensive(rts)
    assert model.start_basis is not None
    assert len(states) == rts.n_branches


# -- the verifier catches tampering -------------------------------------------------------


def test_verify_flags_corrupted_dispatch(rts, rts_benders):
    pg = rts_benders.pg.copy()
    pg[int(np.argmax(pg))] += 0.5
    bad = dataclasses.replace(rts_benders, pg=pg)
    report = verify_solution(rts, bad)
    assert not report.ok
    cats = {v.category for v in report.violations}
    assert "balance" in cats and "objective" in cats


def test_verify_flags_excess_ramp(rts, rts_benders):
    k = _label_pos(rts, "3-24")
    act = rts_benders.actions[k]
    lt_gen = act.lt_gen.copy()
    lt_gen[0] += 5.0
    lt_gen[-1] -= 5.0
    actions = dict(rts_benders.actions)
    actions[k] = dataclasses.replace(act, lt_gen=lt_gen)
    report = verify_solution(rts, dataclasses.replace(rts_benders, actions=actions))
    assert any(v.category in ("ramp", "generator_bounds") and v.contingency == k for v in report.violations)


def test_verify_flags_wrong_objective(rts, rts_benders):
    report = verify_solution(rts, dataclasses.replace(rts_benders, objective=rts_benders.objective * 1.01))
    assert [v.category for v in report.violations] == ["objective"]
