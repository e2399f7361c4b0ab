"""Case files: the JSON schema, a MATPOWER importer and a synthetic-grid generator.

A case file is a JSON object::

    {
      "schema": "scopf-case/1",
      "name": "...", "base_mva": 100.0, "ref": 13,
      "nodes": [1, 2, ...],
      "branches":   [{"id", "from", "to", "b" or "x", "rate_st", "rate_lt", "rate_base", "prob"?}],
      "generators": [{"id", "node", "pmax", "cost", "pmin"?, "ramp"?}],
      "demands":    [{"id", "node", "p", "voll"}],
      "notes": "free text"
    }

Powers and ratings are in per unit on ``base_mva``; ``b`` is the branch
susceptance in per unit (``x``, the series reactance, is accepted instead
on input), ``ramp`` is in pu per minute and ``prob`` is the
outage probability. Costs are in money per pu of energy for the dispatch
interval.
"""
from __future__ import annotations

import json
import math
import re
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import CaseFormatError, NetworkError
from .network import Branch, Demand, Generator, Network

SCHEMA = "scopf-case/1"

BUNDLED = {
    "rts79": "rts79.json",
}

_BRANCH_KEYS = {"id": int, "from": int, "to": int, "rate_st": float, "rate_lt": float, "rate_base": float}
_GEN_KEYS = {"id": int, "node": int, "pmax": float, "cost": float}
_DEM_KEYS = {"id": int, "node": int, "p": float, "voll": float}


def _field(rec: dict, key: str, kind, where: str, optional: bool = False):
    if key not in rec:
        if optional:
            return None
        raise CaseFormatError(f"{where}: missing field '{key}'")
    val = rec[key]
    if val is None and optional:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise CaseFormatError(f"{where}.{key}: expected a number, got {val!r}")
    if kind is int:
        if float(val) != int(val):
            raise CaseFormatError(f"{where}.{key}: expected an integer, got {val!r}")
        return int(val)
    val = float(val)
    if not math.isfinite(val):
        raise CaseFormatError(f"{where}.{key}: must be finite")
    return val


def _records(doc: dict, key: str) -> list:
    recs = doc.get(key, [])
    if not isinstance(recs, list):
        raise CaseFormatError(f"'{key}' must be a list")
    for k, r in enumerate(recs):
        if not isinstance(r, dict):
            raise CaseFormatError(f"{key}[{k}]: expected an object, got {type(r).__name__}")
    return recs


def network_from_dict(doc: dict) -> Network:
    """Validate a parsed case document and build the network."""
    if not isinstance(doc, dict):
        raise CaseFormatError("case document must be a JSON object")
    schema = doc.get("schema")
    if schema != SCHEMA:
        raise CaseFormatError(f"unsupported schema {schema!r}; expected {SCHEMA!r}")
    if "nodes" not in doc or not isinstance(doc["nodes"], list):
        raise CaseFormatError("'nodes' must be a list of integer ids")
    nodes = [_field({"id": n}, "id", int, f"nodes[{k}]") for k, n in enumerate(doc["nodes"])]
    branches = []
    for k, r in enumerate(_records(doc, "branches")):
        where = f"branches[{k}]"
        vals = {key: _field(r, key, kind, where) for key, kind in _BRANCH_KEYS.items()}
        prob = _field(r, "prob", float, where, optional=True)
        if "b" in r:
            b = _field(r, "b", float, where)
            if not b > 0:
                raise CaseFormatError(f"{where}.b: susceptance must be positive, got {b}")
        else:
            x = _field(r, "x", float, where)
            if not x > 0:
                raise CaseFormatError(f"{where}.x: reactance must be positive, got {x}")
            b = 1.0 / x
        branches.append(
            Branch(vals["id"], vals["from"], vals["to"], b, vals["rate_st"], vals["rate_lt"], vals["rate_base"], prob)
        )
    gens = []
    for k, r in enumerate(_records(doc, "generators")):
        where = f"generators[{k}]"
        vals = {key: _field(r, key, kind, where) for key, kind in _GEN_KEYS.items()}
        pmin = _field(r, "pmin", float, where, optional=True) or 0.0
        ramp = _field(r, "ramp", float, where, optional=True)
        gens.append(Generator(vals["id"], vals["node"], vals["pmax"], vals["cost"], pmin, ramp))
    dems = []
    for k, r in enumerate(_records(doc, "demands")):
        where = f"demands[{k}]"
        vals = {key: _field(r, key, kind, where) for key, kind in _DEM_KEYS.items()}
        dems.append(Demand(vals["id"], vals["node"], vals["p"], vals["voll"]))
    ref = doc.get("ref")
    if ref is not None:
        ref = _field(doc, "ref", int, "case")
    base_mva = _field(doc, "base_mva", float, "case", optional=True) or 100.0
    try:
        return Network(tuple(nodes), tuple(branches), tuple(gens), tuple(dems), ref=ref, base_mva=base_mva,
                       name=str(doc.get("name", "")), meta={"notes": doc.get("notes", "")})
    except NetworkError as exc:
        raise CaseFormatError(f"invalid network: {exc}") from exc


def network_to_dict(network: Network, notes: Optional[str] = None) -> dict:
    def num(v):
        return float(v)

    branches = []
    for br in network.branches:
        rec = {"id": br.id, "from": br.from_node, "to": br.to_node, "b": num(br.b),
               "rate_st": num(br.rate_st), "rate_lt": num(br.rate_lt), "rate_base": num(br.rate_base)}
        if br.prob is not None:
            rec["prob"] = num(br.prob)
        branches.append(rec)
    gens = []
    for g in network.generators:
        rec = {"id": g.id, "node": g.node, "pmax": num(g.pmax), "cost": num(g.cost), "pmin": num(g.pmin)}
        if g.ramp is not None:
            rec["ramp"] = num(g.ramp)
        gens.append(rec)
    doc = {
        "schema": SCHEMA,
        "name": network.name,
        "base_mva": num(network.base_mva),
        "ref": network.ref,
        "nodes": list(network.nodes),
        "branches": branches,
        "generators": gens,
        "demands": [{"id": d.id, "node": d.node, "p": num(d.p), "voll": num(d.voll)} for d in network.demands],
    }
    text = network.meta.get("notes", "") if notes is None else notes
    if text:
        doc["notes"] = text
    return doc


def dumps_case(network: Network, notes: Optional[str] = None) -> str:
    return json.dumps(network_to_dict(network, notes), indent=1) + "\n"


def loads_case(text: str, source: str = "<string>") -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseFormatError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return network_from_dict(doc)
    except CaseFormatError as exc:
        raise CaseFormatError(f"{source}: {exc}") from None


def save_case(network: Network, path: Union[str, Path], notes: Optional[str] = None) -> Path:
    path = Path(path)
    path.write_text(dumps_case(network, notes))
    return path


def load_case(path: Union[str, Path]) -> Network:
    """Load a case file; bundled case names such as ``"rts79"`` also work.

    Files ending in ``.m`` are read with :func:`load_matpower`.

    Raises
    ------
    CaseFormatError
        With the file name and the offending record or line.
    FileNotFoundError
        If neither a file nor a bundled case matches.
    """
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        text = resources.files("scopf.data").joinpath(BUNDLED[str(path)]).read_text()
        return loads_case(text, source=str(path))
    if not p.exists():
        raise FileNotFoundError(f"no case file {path!s}; bundled cases: {sorted(BUNDLED)}")
    if p.suffix == ".m":
        return load_matpower(p)
    return loads_case(p.read_text(), source=str(p))


def bundled_case(name: str = "rts79") -> Network:
    return load_case(name)


# -- MATPOWER import ------------------------------------------------------------

_MATRIX = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;", re.S)
_SCALAR = re.compile(r"mpc\.(\w+)\s*=\s*([-+0-9.eE]+)\s*;")


def _parse_matrix(body: str, name: str, source: str) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(body.splitlines(), 1):
        line = line.split("%", 1)[0].strip().rstrip(";").strip()
        if not line:
            continue
        for chunk in line.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            try:
                rows.append([float(t) for t in chunk.replace(",", " ").split()])
            except ValueError:
                raise CaseFormatError(f"{source}: mpc.{name}, row {len(rows) + 1}: cannot parse {chunk!r}") from None
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise CaseFormatError(f"{source}: mpc.{name} has rows of different lengths {sorted(widths)}")
    return np.array(rows) if rows else np.zeros((0, 0))


def parse_matpower(text: str, source: str = "<string>") -> dict:
    """Raw ``mpc`` fields of a MATPOWER case as arrays and scalars."""
    out = {}
    for m in _SCALAR.finditer(text):
        out[m.group(1)] = float(m.group(2))
    for m in _MATRIX.finditer(text):
        out[m.group(1)] = _parse_matrix(m.group(2), m.group(1), source)
    for key in ("bus", "gen", "branch"):
        if key not in out:
            raise CaseFormatError(f"{source}: no mpc.{key} matrix found")
    return out


def load_matpower(path: Union[str, Path], voll: float = 1000.0, default_cost: float = 20.0,
                  rate_default: float = 99.99) -> Network:
    """Import a MATPOWER case as a DC network.

    Ratings map rateA to the base and long-term limits and rateC (or rateA
    when zero) to the short-term limit; zero ratings become ``rate_default``
    pu. Linear cost terms of polynomial ``gencost`` rows are used, scaled to
    money per pu. Out-of-service elements are dropped. Parallel branches are
    kept as separate branches.
    """
    path = Path(path)
    mpc = parse_matpower(path.read_text(), str(path))
    base = float(mpc.get("baseMVA", 100.0))
    bus, gen, branch = mpc["bus"], mpc["gen"], mpc["branch"]
    nodes = tuple(int(b) for b in bus[:, 0])
    ref_rows = bus[bus[:, 1] == 3]
    ref = int(ref_rows[0, 0]) if len(ref_rows) else None
    brs = []
    for k, row in enumerate(branch):
        if row.shape[0] > 10 and row[10] == 0:
            continue
        x = row[3]
        if not x > 0:
            raise CaseFormatError(f"{path}: branch row {k + 1} has nonpositive reactance {x}")
        ra, rc = row[5] / base, row[7] / base
        ra = ra if ra > 0 else rate_default
        rc = max(rc if rc > 0 else ra, ra)
        brs.append(Branch(len(brs) + 1, int(row[0]), int(row[1]), 1.0 / x, rc, ra, ra))
    costs = mpc.get("gencost")
    gens = []
    for k, row in enumerate(gen):
        if row.shape[0] > 7 and row[7] <= 0:
            continue
        cost = default_cost
        if costs is not None and k < len(costs) and costs[k, 0] == 2:
            ncost = int(costs[k, 3])
            coeffs = costs[k, 4 : 4 + ncost]
            cost = float(coeffs[-2]) * base if ncost >= 2 else default_cost
        gens.append(Generator(len(gens) + 1, int(row[0]), max(row[8], 0.0) / base, cost, max(row[9], 0.0) / base))
    dems = []
    for row in bus:
        if row[2] > 0:
            dems.append(Demand(len(dems) + 1, int(row[0]), row[2] / base, voll))
    try:
        return Network(nodes, tuple(brs), tuple(gens), tuple(dems), ref=ref, base_mva=base, name=path.stem)
    except NetworkError as exc:
        raise CaseFormatError(f"{path}: {exc}") from exc


# -- synthetic grids --------------------------------------------------------------

def _bridge_mask(n: int, edges: list) -> np.ndarray:
    """Which edges are bridges, by iterative depth-first low-link numbering."""
    adj = [[] for _ in range(n)]
    for e, (i, j) in enumerate(edges):
        adj[i].append((j, e))
        adj[j].append((i, e))
    disc = [-1] * n
    low = [0] * n
    bridge = np.zeros(len(edges), dtype=bool)
    t = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = t
        t += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            u, via, it = stack[-1]
            for v, e in it:
                if e == via:
                    continue
                if disc[v] < 0:
                    disc[v] = low[v] = t
                    t += 1
                    stack.append((v, e, iter(adj[v])))
                    break
                low[u] = min(low[u], disc[v])
            else:
                stack.pop()
                if stack:
                    p = stack[-1][0]
                    low[p] = min(low[p], low[u])
                    if low[u] > disc[p]:
                        bridge[via] = True
    return bridge


def _outage_envelope(network: Network, P: np.ndarray):
    """Base flows and the largest post-outage flow magnitude per branch.

    Only outages that keep the grid connected count; the post-outage flows
    come from the rank-one angle update applied to all outages at once.
    """
    from .grid import GridMatrices
    from .imml import ISLANDING_RTOL

    mats = GridMatrices.from_network(network)
    X = mats.X
    theta = X @ P
    fr, to, b = network.br_from, network.br_to, network.susceptance
    F0 = b * (theta[fr] - theta[to])
    delta = X[:, fr] - X[:, to]  # N x B, one column per outage
    d = 1.0 / b - (delta[fr, np.arange(len(b))] - delta[to, np.arange(len(b))])
    ok = np.abs(d) >= ISLANDING_RTOL / b
    scale = np.where(ok, (theta[fr] - theta[to]) / np.where(ok, d, 1.0), 0.0)
    Fc = F0[:, None] + b[:, None] * (delta[fr] - delta[to]) * scale[None, :]
    Fc[:, ~ok] = 0.0
    Fc[np.arange(len(b)), np.arange(len(b))] = 0.0
    return F0, np.abs(Fc).max(axis=1, initial=0.0)


def _largest_two_edge_component(n: int, edges: list) -> np.ndarray:
    """Nodes of the biggest component left after deleting every bridge."""
    bridge = _bridge_mask(n, edges)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e, (i, j) in enumerate(edges):
        if not bridge[e]:
            parent[find(i)] = find(j)
    roots = np.array([find(a) for a in range(n)])
    labels, counts = np.unique(roots, return_counts=True)
    return np.flatnonzero(roots == labels[np.argmax(counts)])


def generate_synthetic(nodes: int, branches: int, seed: int = 0, radial_fraction: float = 0.35, spur_depth: int = 2,
                       gen_fraction: float = 0.12, demand_fraction: float = 0.45, load_level: float = 0.55,
                       voll: float = 1000.0, name: Optional[str] = None) -> Network:
    """Reproducible synthetic grid with a meshed core and radial spurs.

    Nodes are scattered in the unit square. The core nodes form a ring
    through near neighbours and the remaining branches become chords
    between nearby core nodes. A ``radial_fraction`` share of the nodes
    hang off as radial spurs at most ``spur_depth`` branches deep; the spur
    branches are the bridges. Generators sit on the bridge-free part,
    demands anywhere. Ratings come from the post-outage flows of a
    merit-order dispatch, scaled so that some outages overload something.

    Raises
    ------
    ValueError
        If ``branches < nodes - 1`` or the core cannot host the extra branches.
    """
    if nodes < 1:
        raise ValueError("need at least one node")
    if branches < nodes - 1:
        raise ValueError(f"{branches} branches cannot connect {nodes} nodes")
    rng = np.random.default_rng(seed)
    pos = rng.random((nodes, 2))
    n_radial = int(round(radial_fraction * nodes)) if nodes > 3 else 0
    core = nodes - n_radial
    extra = branches - (nodes - 1)
    if extra > core * (core - 1) // 2 - (core - 1):
        raise ValueError(f"a core of {core} nodes cannot host {extra} loop-closing branches")
    edges = []
    have = set()

    def link(i, j):
        edges.append((i, j))
        have.add((min(i, j), max(i, j)))

    # core: a nearest-neighbour tour through the core nodes, closed into a ring when
    # there is a branch to spare, so no core branch is a bridge
    tour = [0]
    left = set(range(1, core))
    while left:
        cand = np.fromiter(left, dtype=np.intp)
        nxt = int(cand[np.argmin(np.linalg.norm(pos[cand] - pos[tour[-1]], axis=1))])
        tour.append(nxt)
        left.remove(nxt)
    for a, b in zip(tour[:-1], tour[1:]):
        link(a, b)
    if extra and core > 2:
        link(tour[-1], tour[0])
        extra -= 1
    # spurs: shallow radial trees hanging off the core
    depth = np.zeros(nodes, dtype=int)
    for v in range(core, nodes):
        hosts = np.flatnonzero(depth[:v] < spur_depth)
        u = int(hosts[np.argmin(np.linalg.norm(pos[hosts] - pos[v], axis=1))])
        depth[v] = depth[u] + 1
        link(u, v)
    # chords between near core nodes, nearest pairs first with random skips
    if len(edges) < branches:
        cp = pos[:core]
        dist = np.linalg.norm(cp[:, None, :] - cp[None, :, :], axis=2)
        iu, ju = np.triu_indices(core, 1)
        order = np.argsort(dist[iu, ju] * (1.0 + rng.random(iu.size)), kind="stable")
        for t in order:
            if len(edges) == branches:
                break
            i, j = int(iu[t]), int(ju[t])
            if (i, j) not in have:
                link(i, j)
    ids = list(range(1, nodes + 1))
    x = 0.01 + 0.2 * np.array([np.linalg.norm(pos[i] - pos[j]) for i, j in edges]) + 0.02 * rng.random(len(edges))

    # generators go on the largest loop-connected part so that no single outage strands them
    meshed = _largest_two_edge_component(nodes, edges)
    n_gen = max(1, int(round(gen_fraction * nodes)))
    gen_nodes = np.sort(rng.choice(meshed, size=min(n_gen, len(meshed)), replace=False))
    n_dem = max(1, int(round(demand_fraction * nodes)))
    dem_nodes = np.sort(rng.choice(nodes, size=min(n_dem, nodes), replace=False))
    dem_p = np.round(0.2 + 0.8 * rng.random(len(dem_nodes)), 4)
    total = float(dem_p.sum())
    share = 0.5 + rng.random(len(gen_nodes))
    pmax = np.round(share / share.sum() * total / load_level, 4)
    cost = np.round(5.0 + 35.0 * rng.random(len(gen_nodes)), 3)
    gens = [Generator(k + 1, ids[n], float(pmax[k]), float(cost[k])) for k, n in enumerate(gen_nodes)]
    dems = [Demand(k + 1, ids[n], float(dem_p[k]), voll) for k, n in enumerate(dem_nodes)]

    # ratings from the outage envelope of a merit-order dispatch without network limits
    order = np.argsort(cost, kind="stable")
    pg = np.zeros(len(gens))
    need = total
    for g in order:
        pg[g] = min(pmax[g], need)
        need -= pg[g]
    x = np.round(x, 6)
    probe = Network(tuple(ids), tuple(Branch(k + 1, ids[i], ids[j], 1.0 / x[k], 1.0, 1.0, 1.0)
                                      for k, (i, j) in enumerate(edges)), tuple(gens), tuple(dems),
                    ref=ids[int(gen_nodes[0])])
    F0, envelope = _outage_envelope(probe, probe.injections(pg))
    tight = 0.8 + 0.35 * rng.random(len(edges))  # below 1: that outage overloads the branch
    rate_lt = np.round(np.maximum(np.maximum(np.abs(F0) * 1.05, envelope * tight), 0.25), 4)
    rate_base = rate_lt
    rate_st = np.round(rate_lt * (1.15 + 0.35 * rng.random(len(edges))), 4)
    brs = tuple(
        Branch(k + 1, ids[i], ids[j], float(1.0 / x[k]), float(rate_st[k]), float(rate_lt[k]), float(rate_base[k]))
        for k, (i, j) in enumerate(edges)
    )
    return Network(tuple(ids), brs, tuple(gens), tuple(dems), ref=ids[int(gen_nodes[0])],
                   name=name or f"synthetic-{nodes}-{branches}-s{seed}",
                   meta={"notes": f"generate_synthetic(nodes={nodes}, branches={branches}, seed={seed})"})
