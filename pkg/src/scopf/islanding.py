"""Island detection after branch outages and reference-island bookkeeping."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import IslandingError
from .grid import build_nodal_susceptance, reduced_inverse
from .network import Network


@dataclass(frozen=True)
class IslandPartition:
    """Island label per node position; a label is the smallest node id of its island."""

    labels: np.ndarray
    ref_label: int

    @property
    def count(self) -> int:
        return len(np.unique(self.labels))

    @property
    def islands(self) -> dict:
        out = {}
        for pos, lab in enumerate(self.labels):
            out.setdefault(int(lab), []).append(pos)
        return out

    def reference_mask(self) -> np.ndarray:
        return self.labels == self.ref_label


@dataclass(frozen=True)
class BlackoutAccount:
    lost_demand: float
    lost_generation: float
    nodes: tuple  # node ids outside the reference island
    demands: tuple = ()  # demand positions blacked out
    generators: tuple = ()  # generator positions blacked out

    @property
    def empty(self) -> bool:
        return not self.nodes


def _surviving(network: Network, outaged: Sequence[int]) -> np.ndarray:
    keep = np.ones(network.n_branches, dtype=bool)
    keep[list(outaged)] = False
    return keep


def _partition(network: Network, labels_pos: np.ndarray) -> IslandPartition:
    ids = np.asarray(network.nodes)
    labels = ids[labels_pos]
    return IslandPartition(labels=labels, ref_label=int(labels[network.ref_index]))


def find_islands(network: Network, outaged: Sequence[int] = ()) -> IslandPartition:
    """Connected components of the surviving branch graph.

    Matrix-style propagation: every node starts labelled with its own
    position, each sweep pushes the smaller endpoint label across every
    surviving branch, and pointer jumping shortcuts long chains. Node ids are
    sorted, so the smallest position is also the smallest id.
    """
    keep = _surviving(network, outaged)
    fr = network.br_from[keep]
    to = network.br_to[keep]
    lab = np.arange(network.n_nodes)
    while True:
        m = np.minimum(lab[fr], lab[to])
        new = lab.copy()
        np.minimum.at(new, fr, m)
        np.minimum.at(new, to, m)
        new = new[new]
        if np.array_equal(new, lab):
            break
        lab = new
    return _partition(network, lab)


def find_islands_traversal(network: Network, outaged: Sequence[int] = ()) -> IslandPartition:
    """Breadth-first variant of :func:`find_islands` with identical output."""
    keep = _surviving(network, outaged)
    adj = [[] for _ in range(network.n_nodes)]
    for k in np.flatnonzero(keep):
        i, j = network.br_from[k], network.br_to[k]
        adj[i].append(j)
        adj[j].append(i)
    lab = np.full(network.n_nodes, -1)
    for start in range(network.n_nodes):
        if lab[start] >= 0:
            continue
        lab[start] = start
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if lab[v] < 0:
                    lab[v] = start
                    queue.append(v)
    return _partition(network, lab)


class ReferenceIsland:
    """Reference island of a network after a set of branch outages.

    Holds the reduced inverse of the island's susceptance matrix
    so that flows and PTDF rows can be re-evaluated for new injections.
    """

    def __init__(self, network: Network, outaged: Sequence[int], partition: Optional[IslandPartition] = None):
        self.network = network
        self.outaged = tuple(int(k) for k in outaged)
        self.partition = partition or find_islands(network, self.outaged)
        mask = self.partition.reference_mask()
        self.node_mask = mask
        self.nodes = np.flatnonzero(mask)
        keep = _surviving(network, self.outaged)
        self.branches = np.flatnonzero(keep & mask[network.br_from] & mask[network.br_to])
        self.generators = np.flatnonzero(mask[network.gen_node]) if network.generators else np.zeros(0, int)
        self.demands = np.flatnonzero(mask[network.dem_node]) if network.demands else np.zeros(0, int)
        self.lost_generators = np.flatnonzero(~mask[network.gen_node]) if network.generators else np.zeros(0, int)
        self.lost_demands = np.flatnonzero(~mask[network.dem_node]) if network.demands else np.zeros(0, int)
        self.degenerate = len(self.generators) == 0
        pos = -np.ones(network.n_nodes, dtype=np.intp)
        pos[self.nodes] = np.arange(len(self.nodes))
        self._local = pos
        self._fr = pos[network.br_from[self.branches]]
        self._to = pos[network.br_to[self.branches]]
        self.b = network.susceptance[self.branches]
        # only X is kept: a grid with many radial spurs has one of these per spur branch
        self.X = reduced_inverse(build_nodal_susceptance(self.phi, np.diag(self.b)), int(pos[network.ref_index]))

    @property
    def phi(self) -> np.ndarray:
        """Incidence matrix of the island (its branches by its nodes)."""
        m = len(self.branches)
        phi = np.zeros((m, len(self.nodes)))
        phi[np.arange(m), self._fr] = 1.0
        phi[np.arange(m), self._to] = -1.0
        return phi

    @property
    def H(self) -> np.ndarray:
        return build_nodal_susceptance(self.phi, np.diag(self.b))

    @property
    def lost_nodes(self) -> tuple:
        ids = np.asarray(self.network.nodes)
        return tuple(int(n) for n in ids[~self.node_mask])

    def blackout(self, pg=None, shed=None) -> BlackoutAccount:
        """Load and generation lost outside the reference island.

        ``pg`` is the generator dispatch (installed capacity when None);
        ``shed`` is base-case shedding already applied to the lost demands.
        """
        net = self.network
        pg = net.gen_pmax if pg is None else np.asarray(pg, float)
        served = net.dem_p if shed is None else net.dem_p - np.asarray(shed, float)
        return BlackoutAccount(
            lost_demand=float(served[self.lost_demands].sum()),
            lost_generation=float(pg[self.lost_generators].sum()),
            nodes=self.lost_nodes,
            demands=tuple(int(d) for d in self.lost_demands),
            generators=tuple(int(g) for g in self.lost_generators),
        )

    def flows(self, injections: np.ndarray) -> np.ndarray:
        """Full-length branch flows; the island reference absorbs any mismatch."""
        P = np.asarray(injections, float)[self.nodes]
        theta = self.X @ P
        F = np.zeros(self.network.n_branches)
        F[self.branches] = self.b * (theta[self._fr] - theta[self._to])
        return F

    def ptdf(self) -> np.ndarray:
        """Island PTDF scattered to full (B x N) shape."""
        out = np.zeros((self.network.n_branches, self.network.n_nodes))
        out[np.ix_(self.branches, self.nodes)] = self.b[:, None] * (self.X[self._fr] - self.X[self._to])
        return out

    def ptdf_row(self, branch: int) -> np.ndarray:
        """Full-length PTDF row of ``branch``; zero if it is not in the island."""
        row = np.zeros(self.network.n_nodes)
        loc = np.flatnonzero(self.branches == branch)
        if loc.size == 0:
            return row
        r = loc[0]
        i = self._local[self.network.br_from[branch]]
        j = self._local[self.network.br_to[branch]]
        row[self.nodes] = self.b[r] * (self.X[i] - self.X[j])
        return row


def reference_island_subsystem(network: Network, partition: IslandPartition, outaged: Sequence[int] = (), pg=None):
    """Sub-network on the reference island and the blackout on all other islands.

    Returns
    -------
    (Network, BlackoutAccount)
    """
    if partition.count < 2:
        raise ValueError("partition has a single island; nothing is blacked out")
    island = ReferenceIsland(network, outaged, partition)
    if island.degenerate:
        raise IslandingError("reference island has no generation left")
    ids = np.asarray(network.nodes)
    sub = network.subnetwork(ids[island.nodes], drop_branches=outaged)
    return sub, island.blackout(pg)


@dataclass
class IslandState:
    island: ReferenceIsland
    injections: np.ndarray

    @cached_property
    def flows_full(self) -> np.ndarray:
        return self.island.flows(self.injections)

    @property
    def blackout(self) -> BlackoutAccount:
        return self.island.blackout()

    def ptdf_row_full(self, branch: int) -> np.ndarray:
        return self.island.ptdf_row(branch)


def island_state(network: Network, outaged: Sequence[int], injections: np.ndarray) -> IslandState:
    return IslandState(ReferenceIsland(network, outaged), np.asarray(injections, float))
