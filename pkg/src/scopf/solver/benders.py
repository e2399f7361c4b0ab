"""Benders decomposition of the preventive-corrective DC SCOPF.

The main problem starts as the base-case OPF. Each sweep screens every
contingency against the incumbent with the angle fast path; overloaded
branches turn into cuts built from one post-outage PTDF row, and the
contingency's recourse variables join the main problem the first time they
are needed. The loop stops after a sweep that changes nothing.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from ..errors import ConvergenceError, InfeasibleError
from ..grid import GridMatrices
from ..imml import (
    BranchOutage,
    ScreeningStats,
    _delta,
    contingency_ptdf_row,
    find_overloads,
    outage_denominator,
)
from ..lp import LpModel
from ..network import Network
from .formulation import (
    LONG_TERM,
    LT,
    PREVENTIVE,
    SHORT_TERM,
    ST,
    STATES,
    BaseVars,
    CutRecord,
    ScopfOptions,
    ScopfSolution,
    StateVars,
    Topology,
    add_base_variables,
    add_state_variables,
    blackout_cost,
    contingency_probabilities,
    extract_actions,
    pass_guard,
    ramp_limits,
    state_injection_terms,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BendersCut:
    """One linear restriction on the main problem.

    ``idx``/``vals`` hold the coefficients over main-problem variables and
    ``rhs`` the bound, so the cut reads ``vals . x[idx] <= rhs`` (``sense``
    "<=", upper overload) or ``>= rhs`` (lower overload).
    """

    kind: str
    contingency: int
    branch: int
    ptdf_row: np.ndarray
    flow: float
    limit: float
    sense: str
    rhs: float
    idx: np.ndarray
    vals: np.ndarray

    @property
    def overload(self) -> float:
        return abs(self.flow) - self.limit

    @property
    def infeasible(self) -> bool:
        return self.vals.size == 0 or not np.any(np.abs(self.vals) > 1e-12)

    def activity(self, x: np.ndarray) -> float:
        return float(np.dot(self.vals, x[self.idx]))

    def violation(self, x: np.ndarray) -> float:
        a = self.activity(x)
        return a - self.rhs if self.sense == "<=" else self.rhs - a


class MainProblem:
    """The decomposition's main LP: base case plus registered recourse."""

    def __init__(self, network: Network, mats: Optional[GridMatrices] = None, options: Optional[ScopfOptions] = None,
                 topology: Optional[Topology] = None):
        self.network = network
        self.mats = mats or GridMatrices.from_network(network)
        self.options = options or ScopfOptions()
        self.topology = topology or Topology(network, self.mats)
        self.prob = contingency_probabilities(network, self.options)
        self.ramp = ramp_limits(network, self.options)
        self.model = LpModel("scopf-main")
        self.base: BaseVars = add_base_variables(self.model, network)
        self.states: dict = {}  # branch -> {state: StateVars}
        self.cuts: list = []
        self.solver_time = 0.0
        self.n_solves = 0
        self.x: Optional[np.ndarray] = None
        self.objective = np.nan
        ones = np.ones(network.n_nodes)
        idx, vals, const = state_injection_terms(network, self.base, None, ones)
        self.model.add_constraint((idx, vals), "=", -const, name="balance0")
        phi = self.mats.ptdf()
        for l in range(network.n_branches):
            idx, vals, const = state_injection_terms(network, self.base, None, phi[l])
            if idx.size == 0:
                continue
            h = network.rate_base[l]
            self.model.add_constraint((idx, vals), "<=", h - const, name=f"f0max_{l}")
            self.model.add_constraint((idx, vals), ">=", -h - const, name=f"f0min_{l}")

    # -- recourse registration ------------------------------------------------------

    def is_registered(self, k: int, state: str) -> bool:
        return state in self.states.get(k, {})

    def register(self, k: int, state: str) -> StateVars:
        """Add the recourse of contingency ``k`` in ``state``; idempotent.

        Adds the variables, the state's power balance on the reference island
        and the probability-weighted cost terms. The first registration of an
        islanding contingency also charges the blacked-out demand at voll.
        """
        slot = self.states.setdefault(k, {})
        if state in slot:
            return slot[state]
        net = self.network
        nodes, _, gens, dems = self.topology.members(k)
        if not slot:
            self.model.add_to_objective(((), ()), blackout_cost(net, self.topology, k, self.prob[k]))
        sv = add_state_variables(self.model, net, self.base, k, state, gens, dems, self.prob[k], self.ramp, self.options)
        mask = np.zeros(net.n_nodes)
        mask[nodes] = 1.0
        idx, vals, const = state_injection_terms(net, self.base, sv, mask)
        self.model.add_constraint((idx, vals), "=", -const, name=f"balance_{state[0]}{k}")
        slot[state] = sv
        return sv

    def extend_objective(self, k: int, state: str = LT) -> StateVars:
        return self.register(k, state)

    # -- cuts -----------------------------------------------------------------------

    def make_cut(self, k: int, kind: str, branch: int, flow: float, limit: float, row: np.ndarray) -> BendersCut:
        """Cut keeping branch ``branch`` within ``limit`` after outage ``k``.

        Preventive cuts only see base-case variables; short- and long-term
        cuts also see the contingency's recourse in that state, which is
        registered here if needed.
        """
        if abs(flow) <= limit:
            raise ValueError(f"branch {branch} carries {flow} within its limit {limit}; no cut to make")
        sv = None
        if kind == SHORT_TERM:
            sv = self.register(k, ST)
        elif kind == LONG_TERM:
            sv = self.register(k, LT)
        elif kind != PREVENTIVE:
            raise ValueError(f"unknown cut kind {kind!r}")
        idx, vals, const = state_injection_terms(self.network, self.base, sv, np.asarray(row, float))
        if flow > limit:
            sense, rhs = "<=", limit - const
        else:
            sense, rhs = ">=", -limit - const
        return BendersCut(kind, k, branch, np.asarray(row, float), float(flow), float(limit), sense, float(rhs), idx, vals)

    def add_cut(self, cut: BendersCut):
        if cut.infeasible:
            raise InfeasibleError(
                f"no controllable injection influences branch {self.network.branch_label(cut.branch)} "
                f"after outage of {self.network.branch_label(cut.contingency)}",
                cuts=[cut],
            )
        self.model.add_constraint((cut.idx, cut.vals), cut.sense, cut.rhs,
                                  name=f"cut{len(self.cuts)}_{cut.kind[0]}{cut.contingency}_{cut.branch}")
        self.cuts.append(cut)

    # -- solving --------------------------------------------------------------------

    def solve(self) -> float:
        t0 = time.perf_counter()
        sol = self.model.solve(self.options.backend)
        self.solver_time += time.perf_counter() - t0
        self.n_solves += 1
        if not sol.optimal:
            raise InfeasibleError(f"main problem is {sol.status} after {len(self.cuts)} cuts", cuts=self.cuts)
        self.x = sol.x
        self.objective = sol.objective
        return sol.objective

    @property
    def pg(self) -> np.ndarray:
        return self.x[self.base.pg]

    @property
    def shed(self) -> np.ndarray:
        return self.x[self.base.shed]

    def state_injections(self, k: int, P0: np.ndarray, state: str) -> np.ndarray:
        sv = self.states.get(k, {}).get(state)
        if sv is None:
            return P0
        net = self.network
        gen = -self.x[sv.gen_dn]
        if sv.gen_up.size:
            gen = gen + self.x[sv.gen_up]
        dP = np.bincount(net.gen_node[sv.gen], weights=gen, minlength=net.n_nodes)
        dP += np.bincount(net.dem_node[sv.dem], weights=self.x[sv.shed], minlength=net.n_nodes)
        return P0 + dP


def build_base_opf(network: Network, options: Optional[ScopfOptions] = None) -> MainProblem:
    """Base-case OPF without contingencies, the decomposition's starting point."""
    return MainProblem(network, options=options)


@dataclass
class _Finding:
    k: int
    state: str
    branch: int
    flow: float
    limit: float
    row: np.ndarray


class _Screener:
    """Screens one contingency against the current incumbent."""

    def __init__(self, main: MainProblem, stats: ScreeningStats):
        self.main = main
        self.net = main.network
        self.stats = stats
        self.limits = {ST: self.net.rate_st, LT: self.net.rate_lt}

    def prepare(self):
        main = self.main
        self.P0 = self.net.injections(main.pg, main.shed)
        self.theta0 = main.mats.X @ self.P0

    def __call__(self, k: int) -> tuple:
        main, net = self.main, self.net
        X = main.mats.X
        rtol = main.options.overload_rtol
        island = main.topology.island(k)
        outage = None if island is not None else BranchOutage.of(net, k)
        if outage is not None:
            d = outage_denominator(X, outage)
            delta = _delta(X, outage)
        findings = []
        cache = {}
        for state in STATES:
            P = main.state_injections(k, self.P0, state)
            key = id(P)
            if key not in cache:
                if island is not None:
                    F = island.flows(P)
                else:
                    if P is self.P0:
                        theta = self.theta0
                    else:
                        dP = P - self.P0
                        nz = np.flatnonzero(dP)
                        theta = self.theta0 + X[:, nz] @ dP[nz]
                    theta_c = theta + delta * ((theta[outage.i] - theta[outage.j]) / d)
                    F = net.susceptance * (theta_c[net.br_from] - theta_c[net.br_to])
                    F[k] = 0.0
                cache[key] = F
            F = cache[key]
            for ov in find_overloads(F, self.limits[state], rtol):
                if island is not None:
                    row = island.ptdf_row(ov.branch)
                else:
                    row = contingency_ptdf_row(net, X, outage, ov.branch)
                findings.append(_Finding(k, state, ov.branch, ov.flow, ov.limit, row))
        return k, findings


def _cut_kind(main: MainProblem, k: int, state: str) -> str:
    if not main.options.corrective and not main.topology.islanding[k]:
        return PREVENTIVE
    return SHORT_TERM if state == ST else LONG_TERM


def solve_benders(network: Network, contingencies: Optional[Iterable[int]] = None,
                  options: Optional[ScopfOptions] = None) -> ScopfSolution:
    """Solve the SCOPF by Benders decomposition with IMML screening.

    ``contingencies`` are branch positions (every branch when None).

    Raises
    ------
    InfeasibleError
        If the main problem becomes infeasible; the exception carries the cuts.
    ConvergenceError
        If the number of sweeps exceeds the pass guard.
    """
    options = options or ScopfOptions()
    t_start = time.perf_counter()
    ks = list(range(network.n_branches)) if contingencies is None else sorted(set(int(k) for k in contingencies))
    main = MainProblem(network, options=options)
    topo = main.topology
    for k in ks:
        topo.island(k)  # build island inverses up front; raises on degenerate islands
    stats = ScreeningStats()
    screener = _Screener(main, stats)
    main.solve()
    history = [main.objective]
    log = []
    guard = pass_guard(network, options)
    sweeps = passes = 0

    def apply(k, findings, sweep):
        changed = False
        if topo.islanding[k] and topo.loses_anything(k) and k not in main.states:
            for state in STATES:
                main.register(k, state)
            changed = True
        for f in findings:
            kind = _cut_kind(main, k, f.state)
            cut = main.make_cut(k, kind, f.branch, f.flow, f.limit, f.row)
            main.add_cut(cut)
            log.append(CutRecord(sweep, kind, network.branch_label(k), cut.overload, network.branch_label(f.branch), k, f.branch))
            changed = True
        stats.ptdf_rows += len(findings)
        if findings:
            stats.ptdf_contingencies.add(k)
        return changed, bool(findings)

    while True:
        sweeps += 1
        if sweeps > guard:
            raise ConvergenceError(f"no convergence within {guard} passes")
        changed_any = False
        if options.parallel:
            t0 = time.perf_counter()
            screener.prepare()
            with ThreadPoolExecutor() as pool:
                results = list(pool.map(screener, ks))
            stats.flow_time += time.perf_counter() - t0
            stats.fast_path += sum(1 for k in ks if not topo.islanding[k])
            for k, findings in results:
                changed, _ = apply(k, findings, sweeps)
                changed_any |= changed
            if changed_any:
                main.solve()
                history.append(main.objective)
        else:
            dirty = False
            screener.prepare()
            for k in ks:
                t0 = time.perf_counter()
                _, findings = screener(k)
                stats.flow_time += time.perf_counter() - t0
                if not topo.islanding[k]:
                    stats.fast_path += 1
                changed, cut_added = apply(k, findings, sweeps)
                changed_any |= changed
                dirty |= changed
                if cut_added:
                    main.solve()
                    history.append(main.objective)
                    screener.prepare()
                    dirty = False
            if dirty:
                main.solve()
                history.append(main.objective)
        if not changed_any:
            break
        passes += 1
        logger.info("pass %d: %d cuts so far, objective %.6f", passes, len(main.cuts), main.objective)

    x = main.x
    actions = {}
    for k in ks:
        isl = topo.island(k)
        lost = isl.lost_nodes if isl is not None else ()
        actions[k] = extract_actions(network, x, main.states.get(k, {}), lost)
    total = time.perf_counter() - t_start
    return ScopfSolution(
        method="benders",
        objective=float(main.objective),
        pg=main.pg.copy(),
        shed=main.shed.copy(),
        actions=actions,
        contingencies=tuple(ks),
        cut_log=log,
        passes=passes,
        sweeps=sweeps,
        objective_history=history,
        timing={"total": total, "solver": main.solver_time, "flow_ptdf": stats.flow_time, "solves": main.n_solves},
        islanding=tuple(k for k in ks if topo.islanding[k]),
        case=network.name,
        extras={"main": main, "stats": stats},
    )
