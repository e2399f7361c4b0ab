"""Single-branch outage analysis through rank-one inverse updates.

Removing branch ``l`` between nodes ``i`` and ``j`` changes the nodal
susceptance by ``-b_l * e e^T`` with ``e`` the signed indicator of ``(i, j)``.
With ``delta = X e`` and ``d = x_l - e^T X e`` the Sherman-Morrison identity
gives

    X_c     = X + delta delta^T / d
    theta_c = theta + delta (theta_i - theta_j) / d

``d`` vanishes exactly when the branch is a bridge, i.e. when the outage splits
the grid; those outages are routed to :mod:`scopf.islanding` instead.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import IslandingError
from .grid import GridMatrices, reduced_inverse
from .network import Network

logger = logging.getLogger(__name__)

ISLANDING_RTOL = 1e-8


@dataclass(frozen=True)
class BranchOutage:
    branch: int  # position in network.branches
    i: int  # node position of the from end
    j: int  # node position of the to end
    b: float
    name: str = ""

    @property
    def x(self) -> float:
        return 1.0 / self.b

    @classmethod
    def of(cls, network: Network, k: int) -> "BranchOutage":
        return cls(
            branch=int(k),
            i=int(network.br_from[k]),
            j=int(network.br_to[k]),
            b=float(network.susceptance[k]),
            name=network.branches[k].name,
        )


@dataclass(frozen=True)
class Overload:
    branch: int
    flow: float
    limit: float

    @property
    def excess(self) -> float:
        return abs(self.flow) - self.limit


@dataclass
class ContingencyResult:
    outage: BranchOutage
    islanding: bool
    theta_c: Optional[np.ndarray] = None
    flows: Optional[np.ndarray] = None
    blackout: object = None  # islanding.BlackoutAccount when islanding
    overloads: list = field(default_factory=list)
    ptdf_rows: dict = field(default_factory=dict)


@dataclass
class ScreeningStats:
    """Counting probe for the lazy PTDF discipline."""

    fast_path: int = 0
    ptdf_rows: int = 0
    ptdf_full: int = 0
    island_inverses: int = 0
    ptdf_contingencies: set = field(default_factory=set)
    flow_time: float = 0.0


def _delta(X: np.ndarray, outage: BranchOutage) -> np.ndarray:
    return X[:, outage.i] - X[:, outage.j]


def outage_denominator(X: np.ndarray, outage: BranchOutage) -> float:
    i, j = outage.i, outage.j
    return outage.x - (X[i, i] + X[j, j] - 2.0 * X[i, j])


def is_islanding(d: float, outage: BranchOutage) -> bool:
    return abs(d) < ISLANDING_RTOL * outage.x


def contingency_angles(theta: np.ndarray, X: np.ndarray, outage: BranchOutage) -> np.ndarray:
    """Post-outage angles in O(N).

    Raises
    ------
    IslandingError
        If the outage separates the grid.
    """
    d = outage_denominator(X, outage)
    if is_islanding(d, outage):
        raise IslandingError(f"outage of {outage.name or outage.branch} separates the grid")
    theta = np.asarray(theta, dtype=float)
    return theta + _delta(X, outage) * ((theta[outage.i] - theta[outage.j]) / d)


def _flows_indexed(b, frm, to, theta, outage: BranchOutage) -> np.ndarray:
    F = b * (theta[frm] - theta[to])
    F[outage.branch] = 0.0
    return F


def contingency_flows(psi: np.ndarray, phi: np.ndarray, theta_c: np.ndarray, outage: BranchOutage) -> np.ndarray:
    F = psi @ (phi @ np.asarray(theta_c, dtype=float))
    F[outage.branch] = 0.0
    return F


def contingency_inverse(X: np.ndarray, outage: BranchOutage) -> np.ndarray:
    d = outage_denominator(X, outage)
    if is_islanding(d, outage):
        raise IslandingError(f"outage of {outage.name or outage.branch} separates the grid")
    delta = _delta(X, outage)
    return X + np.outer(delta, delta) / d


def contingency_ptdf(psi: np.ndarray, phi: np.ndarray, X_c: np.ndarray, outage: BranchOutage) -> np.ndarray:
    phi_c = psi @ (phi @ X_c)
    phi_c[outage.branch, :] = 0.0
    return phi_c


def contingency_ptdf_row(network: Network, X: np.ndarray, outage: BranchOutage, branch: int) -> np.ndarray:
    """One row of the post-outage PTDF without forming ``X_c``: O(N)."""
    if branch == outage.branch:
        return np.zeros(X.shape[0])
    d = outage_denominator(X, outage)
    if is_islanding(d, outage):
        raise IslandingError(f"outage of {outage.name or outage.branch} separates the grid")
    i, j = network.br_from[branch], network.br_to[branch]
    delta = _delta(X, outage)
    xi = X[i] + delta[i] * delta / d
    xj = X[j] + delta[j] * delta / d
    return network.susceptance[branch] * (xi - xj)


def find_overloads(flows: np.ndarray, limits: np.ndarray, rtol: float = 1e-6) -> list:
    mask = np.abs(flows) > limits * (1.0 + rtol)
    return [Overload(int(k), float(flows[k]), float(limits[k])) for k in np.flatnonzero(mask)]


def screen_contingency(
    network: Network,
    mats: GridMatrices,
    theta: np.ndarray,
    k: int,
    limits: np.ndarray,
    injections: Optional[np.ndarray] = None,
    with_rows: bool = False,
    stats: Optional[ScreeningStats] = None,
    rtol: float = 1e-6,
) -> ContingencyResult:
    """Screen the outage of branch ``k`` under the state ``theta``.

    Non-islanding outages use the angle fast path; PTDF rows are only formed
    for overloaded branches and only when ``with_rows`` is set. Islanding
    outages are solved on the reference island with a fresh reduced inverse.
    """
    from . import islanding  # local: islanding imports this module

    outage = BranchOutage.of(network, k)
    d = outage_denominator(mats.X, outage)
    if is_islanding(d, outage):
        if injections is None:
            injections = mats.H @ theta
        sub = islanding.island_state(network, [k], injections)
        F = sub.flows_full
        overloads = find_overloads(F, limits, rtol)
        res = ContingencyResult(outage, True, None, F, sub.blackout, overloads)
        if stats is not None:
            stats.island_inverses += 1
        if with_rows and overloads:
            for ov in overloads:
                res.ptdf_rows[ov.branch] = sub.ptdf_row_full(ov.branch)
            if stats is not None:
                stats.ptdf_rows += len(overloads)
                stats.ptdf_contingencies.add(k)
        return res
    theta_c = np.asarray(theta, dtype=float) + _delta(mats.X, outage) * (
        (theta[outage.i] - theta[outage.j]) / d
    )
    F = _flows_indexed(network.susceptance, network.br_from, network.br_to, theta_c, outage)
    overloads = find_overloads(F, limits, rtol)
    res = ContingencyResult(outage, False, theta_c, F, None, overloads)
    if stats is not None:
        stats.fast_path += 1
    if with_rows and overloads:
        for ov in overloads:
            res.ptdf_rows[ov.branch] = contingency_ptdf_row(network, mats.X, outage, ov.branch)
        if stats is not None:
            stats.ptdf_rows += len(overloads)
            stats.ptdf_contingencies.add(k)
    return res


def screen_all(
    network: Network,
    mats: GridMatrices,
    theta: np.ndarray,
    contingencies: Optional[Iterable[int]] = None,
    limits: Optional[np.ndarray] = None,
    injections: Optional[np.ndarray] = None,
    with_rows: bool = False,
    parallel: bool = False,
    stats: Optional[ScreeningStats] = None,
    rtol: float = 1e-6,
) -> list:
    """Screen a set of single-branch outages for one injection state.

    ``contingencies`` holds branch positions (all branches when None) and
    ``limits`` the applicable ratings (long-term post-contingency by default).
    Results come back sorted by branch position whatever the execution order.
    """
    ks = list(range(network.n_branches)) if contingencies is None else sorted(int(k) for k in contingencies)
    if not ks:
        return []
    limits = network.rate_lt if limits is None else np.asarray(limits, dtype=float)
    if injections is None:
        injections = mats.H @ np.asarray(theta, dtype=float)
    t0 = time.perf_counter()

    def one(k):
        return screen_contingency(network, mats, theta, k, limits, injections, with_rows, None, rtol)

    if parallel and len(ks) > 1:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(one, ks))
    else:
        results = [one(k) for k in ks]
    if stats is not None:
        for r in results:
            if r.islanding:
                stats.island_inverses += 1
            else:
                stats.fast_path += 1
            if r.ptdf_rows:
                stats.ptdf_rows += len(r.ptdf_rows)
                stats.ptdf_contingencies.add(r.outage.branch)
        stats.flow_time += time.perf_counter() - t0
    return sorted(results, key=lambda r: r.outage.branch)


def direct_contingency_inverse(network: Network, k: int) -> np.ndarray:
    """Refactorization oracle: reduced inverse of the network without branch ``k``."""
    from .grid import build_branch_susceptance, build_connectivity, build_nodal_susceptance

    phi = build_connectivity(network)
    psi = build_branch_susceptance(network)
    psi[k, k] = 0.0
    return reduced_inverse(build_nodal_susceptance(phi, psi), network.ref_index)
