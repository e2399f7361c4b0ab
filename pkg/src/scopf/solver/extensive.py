"""Extensive-form SCOPF: every contingency state in one linear program.

Each contingency state carries its own voltage angles and branch flows on
the post-outage reference island, tied to the base dispatch through the
same recourse variables the decomposition uses. Nothing is screened; the
LP simply contains all of it.

From a slack basis the simplex method needs roughly one pivot per nodal
balance row just to bring the angles in, so the model carries a structural
starting basis: in every network block the angles, the flows and one local
injection column are basic. With the reference angle left out that block is
the reduced Laplacian bordered by one injection column, which is square and
nonsingular, and the blocks are chained through the base variables only.
"""
from __future__ import annotations

import time
from typing import Iterable, Optional

import numpy as np
import scipy.sparse as sp

from ..errors import InfeasibleError
from ..grid import GridMatrices
from ..lp import INF, LpModel
from ..network import Network
from .formulation import (
    LT,
    ST,
    STATES,
    BaseVars,
    ScopfOptions,
    ScopfSolution,
    StateVars,
    Topology,
    add_base_variables,
    add_state_variables,
    blackout_cost,
    contingency_probabilities,
    extract_actions,
    ramp_limits,
)


def _network_rows(model: LpModel, network: Network, base: BaseVars, sv: Optional[StateVars],
                  nodes: np.ndarray, branches: np.ndarray, limits: np.ndarray, tag: str):
    """Angles, flows, flow definitions and nodal balances of one network state.

    The angle of the reference node is fixed at zero by leaving it out.
    Flow variables carry the thermal limits as bounds.
    """
    ref = network.ref_index
    free = nodes[nodes != ref]
    theta = model.add_variables(len(free), -INF, INF, 0.0, f"theta_{tag}")
    lim = limits[branches]
    flow = model.add_variables(len(branches), -lim, lim, 0.0, f"f_{tag}")
    col = -np.ones(network.n_nodes, dtype=np.int64)
    col[free] = theta
    row_of = -np.ones(network.n_nodes, dtype=np.int64)
    row_of[nodes] = np.arange(len(nodes))
    frm, to = network.br_from[branches], network.br_to[branches]
    b = network.susceptance[branches]
    m = len(branches)

    # f_l - b_l (theta_i - theta_j) = 0
    r = np.arange(m)
    ci, cj = col[frm], col[to]
    rows = [r, r[ci >= 0], r[cj >= 0]]
    cols = [flow, ci[ci >= 0], cj[cj >= 0]]
    vals = [np.ones(m), -b[ci >= 0], b[cj >= 0]]
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, model.n_vars))
    model.add_constraints(A, "=", 0.0, prefix=f"flow_{tag}")

    # sum of outgoing flows - injection = 0 at every island node
    rows = [row_of[frm], row_of[to]]
    cols = [flow, flow]
    vals = [np.ones(m), -np.ones(m)]
    rhs = np.zeros(len(nodes))
    if network.generators:
        g_in = row_of[network.gen_node] >= 0
        g = np.flatnonzero(g_in)
        rows.append(row_of[network.gen_node[g]])
        cols.append(base.pg[g])
        vals.append(-np.ones(len(g)))
    if network.demands:
        d_in = row_of[network.dem_node] >= 0
        d = np.flatnonzero(d_in)
        rows.append(row_of[network.dem_node[d]])
        cols.append(base.shed[d])
        vals.append(-np.ones(len(d)))
        np.add.at(rhs, row_of[network.dem_node[d]], -network.dem_p[d])
    if sv is not None:
        gn = row_of[network.gen_node[sv.gen]]
        if sv.gen_up.size:
            rows.append(gn)
            cols.append(sv.gen_up)
            vals.append(-np.ones(len(gn)))
        rows.append(gn)
        cols.append(sv.gen_dn)
        vals.append(np.ones(len(gn)))
        rows.append(row_of[network.dem_node[sv.dem]])
        cols.append(sv.shed)
        vals.append(-np.ones(len(sv.dem)))
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(len(nodes), model.n_vars)
    )
    model.add_constraints(A, "=", rhs, prefix=f"bal_{tag}")
    return theta, flow


def build_extensive(network: Network, contingencies: Optional[Iterable[int]] = None,
                    options: Optional[ScopfOptions] = None, topology: Optional[Topology] = None):
    """Assemble the extensive-form LP.

    Returns
    -------
    (LpModel, BaseVars, dict)
        The model, the base-case handles and ``{k: {state: StateVars}}``.
    """
    options = options or ScopfOptions()
    ks = list(range(network.n_branches)) if contingencies is None else sorted(set(int(k) for k in contingencies))
    topo = topology or Topology(network, GridMatrices.from_network(network))
    prob = contingency_probabilities(network, options)
    ramp = ramp_limits(network, options)
    model = LpModel("scopf-extensive")
    base = add_base_variables(model, network)
    all_nodes = np.arange(network.n_nodes)
    limits = {ST: network.rate_st, LT: network.rate_lt}
    basic = [*_network_rows(model, network, base, None, all_nodes, np.arange(network.n_branches),
                            network.rate_base, "0"), _slack_column(base.pg, base.shed)]
    states = {}
    for k in ks:
        nodes, branches, gens, dems = topo.members(k)
        model.add_to_objective(((), ()), blackout_cost(network, topo, k, prob[k]))
        states[k] = {}
        for state in STATES:
            sv = add_state_variables(model, network, base, k, state, gens, dems, prob[k], ramp, options)
            if not options.corrective and not topo.islanding[k]:
                # preventive only: the post-outage state must hold without any recourse
                for v in np.concatenate([sv.gen_up, sv.gen_dn, sv.shed]).tolist():
                    model.set_bounds(v, 0.0, 0.0)
            basic += [*_network_rows(model, network, base, sv, nodes, branches, limits[state], f"{state[0]}{k}"),
                      _slack_column(sv.shed, sv.gen_dn)]
            states[k][state] = sv
    if all(b.size for b in basic[2::3]):
        model.start_basis = np.concatenate(basic)
    return model, base, states


def _slack_column(*candidates) -> np.ndarray:
    """First variable of the first non-empty handle array (empty if none)."""
    for c in candidates:
        if c.size:
            return c[:1]
    return np.zeros(0, dtype=np.int64)


def solve_extensive(network: Network, contingencies: Optional[Iterable[int]] = None,
                    options: Optional[ScopfOptions] = None) -> ScopfSolution:
    """Solve the SCOPF as one monolithic LP.

    Raises
    ------
    InfeasibleError
        If the LP has no feasible point.
    """
    options = options or ScopfOptions()
    t_start = time.perf_counter()
    ks = list(range(network.n_branches)) if contingencies is None else sorted(set(int(k) for k in contingencies))
    mats = GridMatrices.from_network(network)
    topo = Topology(network, mats)
    for k in ks:
        topo.island(k)
    model, base, states = build_extensive(network, ks, options, topo)
    t_solve = time.perf_counter()
    # devex pricing: steepest-edge start-up is costly on an LP this large
    extra = {"simplex_dual_edge_weight_strategy": 1} if options.backend == "highs" else {}
    sol = model.solve(options.backend, **extra)
    solver_time = time.perf_counter() - t_solve
    if not sol.optimal:
        raise InfeasibleError(f"extensive-form SCOPF is {sol.status}")
    x = sol.x
    actions = {}
    for k in ks:
        isl = topo.island(k)
        actions[k] = extract_actions(network, x, states[k], isl.lost_nodes if isl is not None else ())
    return ScopfSolution(
        method="extensive",
        objective=float(sol.objective),
        pg=x[base.pg].copy(),
        shed=x[base.shed].copy(),
        actions=actions,
        contingencies=tuple(ks),
        passes=1,
        sweeps=1,
        objective_history=[float(sol.objective)],
        timing={"total": time.perf_counter() - t_start, "solver": solver_time, "flow_ptdf": 0.0, "solves": 1},
        islanding=tuple(k for k in ks if topo.islanding[k]),
        case=network.name,
        extras={"model": model},
    )
