"""A-posteriori check of a SCOPF solution by re-simulating every outage.

Nothing here reuses the rank-one update: each post-outage network is
rebuilt from its branch list, its islands found by breadth-first search and
its reduced susceptance matrix factorized from scratch. The rank-one flows are then
compared against these direct flows as a separate check.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
import scipy.linalg as sla

from ..grid import GridMatrices
from ..imml import BranchOutage, contingency_angles, is_islanding, outage_denominator
from ..islanding import find_islands_traversal
from ..network import Network
from .formulation import LT, ST, ScopfOptions, ScopfSolution, contingency_probabilities, ramp_limits

CATEGORIES = (
    "base_flow",
    "short_term_flow",
    "long_term_flow",
    "balance",
    "generator_bounds",
    "ramp",
    "shed_cap",
    "objective",
)


@dataclass(frozen=True)
class Violation:
    category: str
    amount: float
    contingency: int = -1  # branch position, -1 for the base case
    branch: int = -1  # overloaded branch position, -1 when not a flow limit
    detail: str = ""


@dataclass
class VerificationReport:
    """Worst violation per category plus every violation above ``tol``.

    ``flow_agreement`` is the largest gap between rank-one and direct
    post-outage flows over all non-islanding outages and both states.
    """

    worst: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    flow_agreement: float = 0.0
    objective: float = np.nan
    tol: float = 1e-6

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        lines = [f"{c:<18} {self.worst.get(c, 0.0):.3e}" for c in CATEGORIES]
        lines.append(f"{'imml_vs_direct':<18} {self.flow_agreement:.3e}")
        lines.append("verdict            " + ("clean" if self.ok else f"{len(self.violations)} violation(s)"))
        return "\n".join(lines)


def _direct_flows(network: Network, k: Optional[int], Ps: np.ndarray):
    """Flows after removing branch ``k`` (None for the base case), rebuilt from scratch.

    ``Ps`` holds one injection vector per row. The reduced susceptance
    matrix of the reference island is Cholesky-factorized and solved for all
    rows at once. Returns the flows (one row per injection vector) and the
    boolean mask of nodes on the reference island.
    """
    Ps = np.atleast_2d(np.asarray(Ps, float))
    out = () if k is None else (k,)
    part = find_islands_traversal(network, out)
    mask = part.reference_mask()
    keep = np.ones(network.n_branches, dtype=bool)
    if k is not None:
        keep[k] = False
    nodes = np.flatnonzero(mask)
    br = np.flatnonzero(keep & mask[network.br_from] & mask[network.br_to])
    loc = -np.ones(network.n_nodes, dtype=np.intp)
    loc[nodes] = np.arange(len(nodes))
    fr, to = loc[network.br_from[br]], loc[network.br_to[br]]
    b = network.susceptance[br]
    n = len(nodes)
    H = np.zeros((n, n))
    np.add.at(H, (fr, fr), b)
    np.add.at(H, (to, to), b)
    np.add.at(H, (fr, to), -b)
    np.add.at(H, (to, fr), -b)
    free = np.flatnonzero(np.arange(n) != loc[network.ref_index])
    theta = np.zeros((n, Ps.shape[0]))
    if free.size:
        factor = sla.cho_factor(H[np.ix_(free, free)], lower=True, check_finite=False)
        theta[free] = sla.cho_solve(factor, Ps[:, nodes[free]].T, check_finite=False)
    F = np.zeros((Ps.shape[0], network.n_branches))
    F[:, br] = (b[:, None] * (theta[fr] - theta[to])).T
    return F, mask


def _flow_violations(F, limits, k, category, tol, report):
    excess = np.abs(F) - limits
    worst = float(max(excess.max(initial=0.0), 0.0))
    report.worst[category] = max(report.worst.get(category, 0.0), worst)
    for l in np.flatnonzero(excess > tol):
        report.violations.append(Violation(category, float(excess[l]), -1 if k is None else k, int(l)))


def _note(report, category, amount, k=-1, detail=""):
    amount = float(max(amount, 0.0))
    report.worst[category] = max(report.worst.get(category, 0.0), amount)
    if amount > report.tol:
        report.violations.append(Violation(category, amount, k, -1, detail))


def verify_solution(network: Network, solution: ScopfSolution, contingencies: Optional[Iterable[int]] = None,
                    options: Optional[ScopfOptions] = None, tol: float = 1e-6) -> VerificationReport:
    """Re-check limits, balances, ramps, shed caps and the objective.

    Flow limits, power balances and bounds are checked to ``tol`` in pu; the
    objective is recomputed from the dispatch and checked to ``tol``
    relative. Never raises on a bad solution; everything lands in the
    report.
    """
    options = options or ScopfOptions()
    ks = solution.contingencies if contingencies is None else tuple(sorted(set(int(k) for k in contingencies)))
    report = VerificationReport(worst={c: 0.0 for c in CATEGORIES}, tol=tol)
    net = network
    pg, shed = np.asarray(solution.pg, float), np.asarray(solution.shed, float)
    prob = contingency_probabilities(net, options)
    ramp = ramp_limits(net, options)
    mats = GridMatrices.from_network(net)

    _note(report, "generator_bounds", max(np.max(net.gen_pmin - pg, initial=0.0), np.max(pg - net.gen_pmax, initial=0.0)),
          detail="base dispatch")
    _note(report, "shed_cap", max(np.max(-shed, initial=0.0), np.max(shed - net.dem_p, initial=0.0)), detail="base shed")
    P0 = net.injections(pg, shed)
    _note(report, "balance", abs(P0.sum()), detail="base case")
    F0, _ = _direct_flows(net, None, P0)
    _flow_violations(F0[0], net.rate_base, None, "base_flow", tol, report)

    objective = float(np.dot(net.gen_cost, pg) + np.dot(net.dem_voll, shed))
    theta0 = mats.X @ P0
    for k in ks:
        act = solution.actions.get(k)
        if act is None:
            _note(report, "objective", np.inf, k, "missing contingency actions")
            continue
        outage = BranchOutage.of(net, k)
        islanding = is_islanding(outage_denominator(mats.X, outage), outage)
        states = ((ST, act.st_gen, act.st_shed, net.rate_st), (LT, act.lt_gen, act.lt_shed, net.rate_lt))
        Ps = []
        for state, gen, dshed, _ in states:
            P = P0 + net.nodal_generation(gen)
            if len(net.demands):
                P = P + np.bincount(net.dem_node, weights=np.asarray(dshed, float), minlength=net.n_nodes)
            Ps.append(P)
        Fs, mask = _direct_flows(net, k, np.array(Ps))
        for (state, gen, dshed, limits), P, F in zip(states, Ps, Fs):
            gen, dshed = np.asarray(gen, float), np.asarray(dshed, float)
            cap = options.shed_cap * net.dem_p
            _note(report, "shed_cap", max(np.max(dshed - cap, initial=0.0), np.max(-dshed, initial=0.0)), k, state)
            if not options.corrective and not islanding:
                # preventive only: no recourse allowed, so any action is an excess ramp
                _note(report, "ramp", max(np.max(np.abs(gen), initial=0.0), np.max(np.abs(dshed), initial=0.0)),
                      k, f"{state} recourse in preventive mode")
            out = pg + gen
            if state == ST:
                _note(report, "generator_bounds", max(np.max(gen, initial=0.0), np.max(-out, initial=0.0)), k, state)
            else:
                _note(report, "ramp", np.max(np.abs(gen) - ramp, initial=0.0), k, state)
                _note(report, "generator_bounds",
                      max(np.max(net.gen_pmin - out, initial=0.0), np.max(out - net.gen_pmax, initial=0.0)), k, state)
            _note(report, "balance", abs(P[mask].sum()), k, state)
            _flow_violations(F, limits, k, "short_term_flow" if state == ST else "long_term_flow", tol, report)
            if not islanding:
                theta = theta0 + mats.X @ (P - P0)
                theta_c = contingency_angles(theta, mats.X, outage)
                Fi = net.susceptance * (theta_c[net.br_from] - theta_c[net.br_to])
                Fi[k] = 0.0
                report.flow_agreement = max(report.flow_agreement, float(np.max(np.abs(Fi - F), initial=0.0)))
            if state == LT:
                objective += prob[k] * float(np.dot(net.gen_cost, np.maximum(gen, 0.0)))
                objective += prob[k] * options.down_cost * float(np.maximum(-gen, 0.0).sum())
            objective += prob[k] * float(np.dot(net.dem_voll, dshed))
        if islanding:
            lost = ~mask[net.dem_node] if len(net.demands) else np.zeros(0, bool)
            objective += prob[k] * float(np.dot(net.dem_voll[lost], net.dem_p[lost]))
    report.objective = objective
    gap = abs(objective - solution.objective) / max(1.0, abs(solution.objective))
    _note(report, "objective", gap, detail=f"recomputed {objective:.9g} vs reported {solution.objective:.9g}")
    return report
