"""Network description: nodes, branches, generators and demands in per unit."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import NetworkError


@dataclass(frozen=True)
class Branch:
    id: int
    from_node: int
    to_node: int
    b: float
    rate_st: float
    rate_lt: float
    rate_base: float
    prob: Optional[float] = None

    @property
    def x(self) -> float:
        return 1.0 / self.b

    @property
    def name(self) -> str:
        return f"{self.from_node}-{self.to_node}"


@dataclass(frozen=True)
class Generator:
    id: int
    node: int
    pmax: float
    cost: float
    pmin: float = 0.0
    ramp: Optional[float] = None  # pu/min


@dataclass(frozen=True)
class Demand:
    id: int
    node: int
    p: float
    voll: float


@dataclass(frozen=True)
class Network:
    """Immutable DC network.

    Nodes are referred to by their integer ids everywhere in the public
    surface; matrices are indexed by position in the sorted ``nodes`` tuple.
    When ``ref`` is None the lowest-id node hosting a generator becomes the
    angle reference.
    """

    nodes: tuple
    branches: tuple
    generators: tuple = ()
    demands: tuple = ()
    ref: Optional[int] = None
    base_mva: float = 100.0
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(int(n) for n in self.nodes)))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "demands", tuple(self.demands))
        if len(set(self.nodes)) != len(self.nodes):
            raise NetworkError("duplicate node ids")
        if not self.nodes:
            raise NetworkError("network has no nodes")
        if self.ref is None:
            gen_nodes = sorted({g.node for g in self.generators})
            if not gen_nodes:
                raise NetworkError("no reference node given and no generator to pick one from")
            object.__setattr__(self, "ref", gen_nodes[0])
        self._validate()

    def _validate(self):
        known = set(self.nodes)
        if self.ref not in known:
            raise NetworkError(f"reference node {self.ref} is not a declared node")
        seen = set()
        for br in self.branches:
            if br.id in seen:
                raise NetworkError(f"duplicate branch id {br.id}")
            seen.add(br.id)
            for end in (br.from_node, br.to_node):
                if end not in known:
                    raise NetworkError(f"branch {br.id} ({br.name}) references unknown node {end}")
            if br.from_node == br.to_node:
                raise NetworkError(f"branch {br.id} is a self-loop at node {br.from_node}")
            if not (br.b > 0 and math.isfinite(br.b)):
                raise NetworkError(f"branch {br.id} ({br.name}) has nonpositive susceptance {br.b}")
            if min(br.rate_st, br.rate_lt, br.rate_base) < 0:
                raise NetworkError(f"branch {br.id} ({br.name}) has a negative rating")
            if br.rate_st < br.rate_lt:
                raise NetworkError(
                    f"branch {br.id} ({br.name}): short-term rating {br.rate_st} "
                    f"below long-term rating {br.rate_lt}"
                )
            if br.prob is not None and not 0.0 <= br.prob <= 1.0:
                raise NetworkError(f"branch {br.id} outage probability {br.prob} outside [0, 1]")
        for kind, items in (("generator", self.generators), ("demand", self.demands)):
            ids = [it.id for it in items]
            if len(set(ids)) != len(ids):
                raise NetworkError(f"duplicate {kind} ids")
            for it in items:
                if it.node not in known:
                    raise NetworkError(f"{kind} {it.id} sits on unknown node {it.node}")
        for g in self.generators:
            if g.pmin > g.pmax or g.pmin < 0:
                raise NetworkError(f"generator {g.id}: need 0 <= pmin <= pmax")
            if g.ramp is not None and g.ramp < 0:
                raise NetworkError(f"generator {g.id}: negative ramp rate")
        for d in self.demands:
            if d.p < 0 or d.voll < 0:
                raise NetworkError(f"demand {d.id}: negative power or voll")

    # -- sizes and lookups -------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    @cached_property
    def node_index(self) -> dict:
        return {n: k for k, n in enumerate(self.nodes)}

    @cached_property
    def ref_index(self) -> int:
        return self.node_index[self.ref]

    def branch_position(self, branch_id: int) -> int:
        for k, br in enumerate(self.branches):
            if br.id == branch_id:
                return k
        raise KeyError(branch_id)

    def branch_label(self, k: int) -> str:
        return self.branches[k].name

    # -- vectorized views --------------------------------------------------

    @cached_property
    def br_from(self) -> np.ndarray:
        return np.array([self.node_index[b.from_node] for b in self.branches], dtype=np.intp)

    @cached_property
    def br_to(self) -> np.ndarray:
        return np.array([self.node_index[b.to_node] for b in self.branches], dtype=np.intp)

    @cached_property
    def susceptance(self) -> np.ndarray:
        return np.array([b.b for b in self.branches], dtype=float)

    @cached_property
    def reactance(self) -> np.ndarray:
        return 1.0 / self.susceptance

    @cached_property
    def rate_st(self) -> np.ndarray:
        return np.array([b.rate_st for b in self.branches], dtype=float)

    @cached_property
    def rate_lt(self) -> np.ndarray:
        return np.array([b.rate_lt for b in self.branches], dtype=float)

    @cached_property
    def rate_base(self) -> np.ndarray:
        return np.array([b.rate_base for b in self.branches], dtype=float)

    @cached_property
    def outage_prob(self) -> np.ndarray:
        """Outage probabilities, NaN where the case leaves them unset."""
        return np.array([np.nan if b.prob is None else b.prob for b in self.branches], dtype=float)

    @cached_property
    def gen_node(self) -> np.ndarray:
        return np.array([self.node_index[g.node] for g in self.generators], dtype=np.intp)

    @cached_property
    def gen_pmax(self) -> np.ndarray:
        return np.array([g.pmax for g in self.generators], dtype=float)

    @cached_property
    def gen_pmin(self) -> np.ndarray:
        return np.array([g.pmin for g in self.generators], dtype=float)

    @cached_property
    def gen_cost(self) -> np.ndarray:
        return np.array([g.cost for g in self.generators], dtype=float)

    @cached_property
    def gen_ramp(self) -> np.ndarray:
        """Ramp rates in pu/min, NaN where the case leaves them unset."""
        return np.array([np.nan if g.ramp is None else g.ramp for g in self.generators], dtype=float)

    @cached_property
    def dem_node(self) -> np.ndarray:
        return np.array([self.node_index[d.node] for d in self.demands], dtype=np.intp)

    @cached_property
    def dem_p(self) -> np.ndarray:
        return np.array([d.p for d in self.demands], dtype=float)

    @cached_property
    def dem_voll(self) -> np.ndarray:
        return np.array([d.voll for d in self.demands], dtype=float)

    def nodal_generation(self, pg) -> np.ndarray:
        return np.bincount(self.gen_node, weights=np.asarray(pg, float), minlength=self.n_nodes)

    def nodal_demand(self, served=None) -> np.ndarray:
        served = self.dem_p if served is None else np.asarray(served, float)
        return np.bincount(self.dem_node, weights=served, minlength=self.n_nodes)

    def injections(self, pg, shed=None) -> np.ndarray:
        """Net nodal injection for generator outputs ``pg`` and demand shedding ``shed``."""
        served = self.dem_p if shed is None else self.dem_p - np.asarray(shed, float)
        return self.nodal_generation(pg) - self.nodal_demand(served)

    # -- derived networks --------------------------------------------------

    def subnetwork(self, node_ids: Iterable[int], drop_branches: Sequence[int] = ()) -> "Network":
        """Restrict to ``node_ids``; branches listed by position in ``drop_branches`` are removed."""
        keep = set(int(n) for n in node_ids)
        drop = set(int(k) for k in drop_branches)
        ref = self.ref if self.ref in keep else None
        return Network(
            nodes=tuple(sorted(keep)),
            branches=tuple(
                br
                for k, br in enumerate(self.branches)
                if k not in drop and br.from_node in keep and br.to_node in keep
            ),
            generators=tuple(g for g in self.generators if g.node in keep),
            demands=tuple(d for d in self.demands if d.node in keep),
            ref=ref,
            base_mva=self.base_mva,
            name=self.name,
        )
