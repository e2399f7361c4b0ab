"""Data types and model-building blocks shared by both SCOPF methods."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import IslandingError
from ..grid import GridMatrices
from ..imml import BranchOutage, is_islanding, outage_denominator
from ..islanding import ReferenceIsland
from ..lp import INF, LpModel
from ..network import Network

ST, LT = "short-term", "long-term"
STATES = (ST, LT)

PREVENTIVE, SHORT_TERM, LONG_TERM = "preventive", "short-term", "long-term"
CUT_KINDS = (PREVENTIVE, SHORT_TERM, LONG_TERM)

COEF_TOL = 1e-10


@dataclass(frozen=True)
class ScopfOptions:
    """Knobs for both solution methods.

    ``dt_lt`` is the time from the outage to the long-term state in minutes;
    together with generator ramp rates it bounds long-term redispatch.
    """

    dt_lt: float = 15.0
    default_prob: float = 1e-4
    default_ramp: float = 0.01  # fraction of pmax per minute
    shed_cap: float = 0.1
    overload_rtol: float = 1e-6
    down_cost: float = 0.0
    corrective: bool = True
    parallel: bool = False
    max_passes: Optional[int] = None
    backend: str = "highs"


def contingency_probabilities(network: Network, options: ScopfOptions) -> np.ndarray:
    p = network.outage_prob
    return np.where(np.isnan(p), options.default_prob, p)


def ramp_limits(network: Network, options: ScopfOptions) -> np.ndarray:
    """Largest long-term change per generator, ramp rate times ``dt_lt``."""
    r = network.gen_ramp
    r = np.where(np.isnan(r), options.default_ramp * network.gen_pmax, r)
    return r * options.dt_lt


class Topology:
    """Per-contingency island structure, computed once per network."""

    def __init__(self, network: Network, mats: GridMatrices):
        self.network = network
        self.mats = mats
        self._islands = {}
        self.islanding = np.zeros(network.n_branches, dtype=bool)
        for k in range(network.n_branches):
            out = BranchOutage.of(network, k)
            self.islanding[k] = is_islanding(outage_denominator(mats.X, out), out)

    def island(self, k: int) -> Optional[ReferenceIsland]:
        if not self.islanding[k]:
            return None
        if k not in self._islands:
            isl = ReferenceIsland(self.network, [k])
            if isl.degenerate:
                raise IslandingError(f"outage of {self.network.branch_label(k)} leaves the reference island without generation")
            self._islands[k] = isl
        return self._islands[k]

    def loses_anything(self, k: int) -> bool:
        isl = self.island(k)
        return isl is not None and (len(isl.lost_demands) > 0 or len(isl.lost_generators) > 0)

    def members(self, k: int):
        """(node positions, branch positions, generators, demands) of the post-outage reference island."""
        net = self.network
        isl = self.island(k)
        if isl is None:
            branches = np.delete(np.arange(net.n_branches), k)
            return (np.arange(net.n_nodes), branches, np.arange(len(net.generators)), np.arange(len(net.demands)))
        return isl.nodes, isl.branches, isl.generators, isl.demands


@dataclass
class StateVars:
    """Handles of the recourse variables of one contingency state.

    ``gen`` holds the generators that may act, ``gen_up``/``gen_dn`` their
    increase/decrease handles (``gen_up`` is empty in the short-term state).
    """

    contingency: int
    state: str
    gen: np.ndarray
    gen_up: np.ndarray
    gen_dn: np.ndarray
    dem: np.ndarray
    shed: np.ndarray


@dataclass(frozen=True)
class BaseVars:
    pg: np.ndarray
    shed: np.ndarray


def add_base_variables(model: LpModel, network: Network) -> BaseVars:
    pg = model.add_variables(len(network.generators), network.gen_pmin, network.gen_pmax, network.gen_cost, "pg0")
    shed = model.add_variables(len(network.demands), 0.0, network.dem_p, network.dem_voll, "shed0")
    return BaseVars(pg, shed)


def add_state_variables(
    model: LpModel,
    network: Network,
    base: BaseVars,
    k: int,
    state: str,
    gens: np.ndarray,
    dems: np.ndarray,
    prob: float,
    ramp: np.ndarray,
    options: ScopfOptions,
) -> StateVars:
    """Recourse variables, their coupling rows and their objective terms.

    Short-term: generation decrease (down to zero output) and shedding.
    Long-term: increase and decrease within the ramp limit, output kept in
    [pmin, pmax], and shedding. Shedding is capped at ``shed_cap`` of each
    demand. Weighted by the outage probability in the objective.
    """
    tag = f"{state[0]}{k}"
    cap = options.shed_cap * network.dem_p[dems]
    shed = model.add_variables(len(dems), 0.0, cap, prob * network.dem_voll[dems], f"shed_{tag}")
    pmax = network.gen_pmax[gens]
    if state == ST:
        dn = model.add_variables(len(gens), 0.0, pmax, 0.0, f"dec_{tag}")
        up = np.zeros(0, dtype=np.int64)
        for g, v in zip(gens.tolist(), dn.tolist()):
            model.add_constraint(((v, base.pg[g]), (1.0, -1.0)), "<=", 0.0)
    else:
        lim = ramp[gens]
        up = model.add_variables(len(gens), 0.0, lim, prob * network.gen_cost[gens], f"up_{tag}")
        dn = model.add_variables(len(gens), 0.0, lim, prob * options.down_cost, f"dn_{tag}")
        for g, u, d in zip(gens.tolist(), up.tolist(), dn.tolist()):
            coeffs = ((base.pg[g], u, d), (1.0, 1.0, -1.0))
            model.add_constraint(coeffs, "<=", float(network.gen_pmax[g]))
            model.add_constraint(coeffs, ">=", float(network.gen_pmin[g]))
    return StateVars(k, state, np.asarray(gens), up, dn, np.asarray(dems), shed)


def blackout_cost(network: Network, topo: Topology, k: int, prob: float) -> float:
    isl = topo.island(k)
    if isl is None or len(isl.lost_demands) == 0:
        return 0.0
    d = isl.lost_demands
    return float(prob * np.dot(network.dem_voll[d], network.dem_p[d]))


def state_injection_terms(network: Network, base: BaseVars, sv: Optional[StateVars], weights: np.ndarray):
    """Linear form of ``weights . P_state`` over model variables.

    ``weights`` is a length-N nodal vector (a PTDF row, or an indicator for
    balance rows). Returns ``(idx, vals, constant)``. Coefficients below
    ``COEF_TOL`` in magnitude are round-off from the PTDF and are dropped.
    """
    weights = np.where(np.abs(weights) > COEF_TOL, weights, 0.0)
    gw = weights[network.gen_node] if len(network.generators) else np.zeros(0)
    dw = weights[network.dem_node] if len(network.demands) else np.zeros(0)
    idx = [base.pg, base.shed]
    val = [gw, dw]
    if sv is not None:
        if sv.gen_up.size:
            idx.append(sv.gen_up)
            val.append(gw[sv.gen])
        idx.append(sv.gen_dn)
        val.append(-gw[sv.gen])
        idx.append(sv.shed)
        val.append(dw[sv.dem])
    const = -float(np.dot(dw, network.dem_p)) if len(network.demands) else 0.0
    idx = np.concatenate(idx).astype(np.int64)
    val = np.concatenate(val)
    nz = np.abs(val) > COEF_TOL
    return idx[nz], val[nz], const


@dataclass
class ContingencyActions:
    """Recourse of one contingency, per generator and per demand.

    Generator entries are signed output changes relative to the base case;
    shedding entries are additional shed demand. Blacked-out elements carry
    zeros here and are listed in ``lost_nodes``.
    """

    st_gen: np.ndarray
    st_shed: np.ndarray
    lt_gen: np.ndarray
    lt_shed: np.ndarray
    lost_nodes: tuple = ()
    registered: tuple = ()


@dataclass(frozen=True)
class CutRecord:
    iteration: int
    kind: str
    contingency: str
    overload: float
    branch: str
    contingency_index: int = -1
    branch_index: int = -1


@dataclass
class ScopfSolution:
    method: str
    objective: float
    pg: np.ndarray
    shed: np.ndarray
    actions: dict  # branch position -> ContingencyActions
    contingencies: tuple
    cut_log: list = field(default_factory=list)
    passes: int = 0
    sweeps: int = 0
    objective_history: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    islanding: tuple = ()  # branch positions whose outage separates the grid
    status: str = "optimal"
    case: str = ""
    extras: dict = field(default_factory=dict, repr=False, compare=False)

    def injections(self, network: Network) -> np.ndarray:
        return network.injections(self.pg, self.shed)

    def node_changes(self, network: Network, k: int, state: str) -> dict:
        """Injection change per node id after contingency ``k`` in ``state``.

        Shedding counts as an injection increase; blacked-out nodes lose
        their whole base injection.
        """
        act = self.actions.get(k)
        if act is None:
            return {}
        gen, shed = (act.st_gen, act.st_shed) if state == ST else (act.lt_gen, act.lt_shed)
        delta = network.nodal_generation(gen) + network.nodal_demand(shed)
        P0 = self.injections(network)
        for n in act.lost_nodes:
            delta[network.node_index[n]] = -P0[network.node_index[n]]
        return {network.nodes[p]: float(delta[p]) for p in range(network.n_nodes)}


def zero_actions(network: Network) -> ContingencyActions:
    g, d = len(network.generators), len(network.demands)
    return ContingencyActions(np.zeros(g), np.zeros(d), np.zeros(g), np.zeros(d))


def extract_actions(network: Network, x: np.ndarray, states: dict, lost_nodes: tuple) -> ContingencyActions:
    act = zero_actions(network)
    act.lost_nodes = lost_nodes
    for state, sv in states.items():
        gen = np.zeros(len(network.generators))
        shed = np.zeros(len(network.demands))
        change = -x[sv.gen_dn]
        if sv.gen_up.size:
            change = change + x[sv.gen_up]
        gen[sv.gen] = change
        shed[sv.dem] = x[sv.shed]
        if state == ST:
            act.st_gen, act.st_shed = gen, shed
        else:
            act.lt_gen, act.lt_shed = gen, shed
    act.registered = tuple(s for s in STATES if s in states)
    return act


def pass_guard(network: Network, options: ScopfOptions) -> int:
    guard = max(network.n_branches, 1) ** 2
    return guard if options.max_passes is None else min(guard, int(options.max_passes))


def isclose_rel(a: float, b: float, rtol: float) -> bool:
    return math.isclose(a, b, rel_tol=rtol, abs_tol=rtol)
