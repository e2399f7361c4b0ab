"""Text and JSON reports of a SCOPF solution.

Both formats are deterministic for a given solution: tables are sorted by
contingency position and node id, numbers are printed with fixed precision
and timing is left out unless asked for, so two runs of the same case give
byte-identical files.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .network import Network
from .solver.formulation import LT, PREVENTIVE, ST, ContingencyActions, CutRecord, ScopfSolution

REPORT_SCHEMA = "scopf-report/1"
SHOW_TOL = 5e-7  # smallest nodal change listed in the action tables


def _num(v: float, digits: int = 4) -> str:
    s = f"{v:.{digits}f}"
    return s[1:] if s.startswith("-") and float(s) == 0.0 else s


def cut_type(kind: str) -> str:
    """Cut-log type: cuts that may use post-contingency actions are corrective."""
    return "Preventive" if kind == PREVENTIVE else "Corrective"


def action_table(network: Network, solution: ScopfSolution, state: str) -> list:
    """Rows ``(contingency label, node id, change)`` aggregated per node."""
    rows = []
    for k in sorted(solution.actions):
        act = solution.actions[k]
        if state not in act.registered and not act.lost_nodes:
            continue
        for node, change in sorted(solution.node_changes(network, k, state).items()):
            if abs(change) > SHOW_TOL:
                rows.append((network.branch_label(k), node, change))
    return rows


def islanding_census(network: Network, solution: ScopfSolution) -> list:
    rows = []
    for k in solution.islanding:
        act = solution.actions.get(k)
        lost = act.lost_nodes if act is not None else ()
        rows.append((network.branch_label(k), len(lost), lost))
    return rows


def _table(header: tuple, rows: list, aligns: str) -> list:
    cells = [tuple(str(c) for c in header)] + [tuple(str(c) for c in r) for r in rows]
    widths = [max(len(r[c]) for r in cells) for c in range(len(header))]

    def fmt(r):
        return "  ".join(v.rjust(w) if a == "r" else v.ljust(w) for v, w, a in zip(r, widths, aligns)).rstrip()

    out = [fmt(cells[0]), "  ".join("-" * w for w in widths)]
    out.extend(fmt(r) for r in cells[1:])
    return out


def format_text(network: Network, solution: ScopfSolution, timing: bool = False) -> str:
    s = solution
    lines = [
        f"case        {s.case or network.name}",
        f"method      {s.method}",
        f"status      {s.status}",
        f"objective   {s.objective:.6f}",
        f"passes      {s.passes} (sweeps {s.sweeps})",
        f"outages     {len(s.contingencies)} screened, {len(s.islanding)} islanding",
        f"cuts        {len(s.cut_log)}",
    ]
    if timing and s.timing:
        total = s.timing.get("total", 0.0) or 0.0
        lines.append("")
        lines.append("timing")
        for key in ("total", "solver", "flow_ptdf"):
            if key in s.timing:
                share = f"  ({100.0 * s.timing[key] / total:5.1f} %)" if total > 0 and key != "total" else ""
                lines.append(f"  {key:<10} {s.timing[key]:10.4f} s{share}")
        if "solves" in s.timing:
            lines.append(f"  {'solves':<10} {s.timing['solves']:10d}")

    lines += ["", "base dispatch per node"]
    P0 = network.nodal_generation(s.pg)
    shed = network.nodal_demand(s.shed) if len(network.demands) else np.zeros(network.n_nodes)
    rows = [(n, _num(P0[p]), _num(shed[p])) for p, n in enumerate(network.nodes) if abs(P0[p]) > SHOW_TOL or abs(shed[p]) > SHOW_TOL]
    lines += _table(("node", "generation", "shed"), rows, "lrr")

    if s.cut_log:
        lines += ["", "cuts added"]
        by_iter = {}
        for c in s.cut_log:
            by_iter.setdefault(c.iteration, []).append(c)
        for it in sorted(by_iter):
            lines.append(f"iteration {it}")
            rows = [(cut_type(c.kind), c.contingency, _num(c.overload), "@ " + c.branch, c.kind) for c in by_iter[it]]
            lines += _table(("type", "contingency", "overload [pu]", "branch", "limit"), rows, "llrll")

    for state, title in ((ST, "short-term actions per node"), (LT, "long-term actions per node")):
        rows = [(c, n, _num(v, 2) if abs(v) >= 0.005 else _num(v)) for c, n, v in action_table(network, s, state)]
        if rows:
            lines += ["", title]
            lines += _table(("contingency", "node", "change [pu]"), rows, "lrr")

    census = islanding_census(network, s)
    lines += ["", "islanding outages"]
    if census:
        rows = [(c, n, " ".join(str(x) for x in lost)) for c, n, lost in census]
        lines += _table(("outage", "lost nodes", "nodes"), rows, "lrl")
    else:
        lines.append("none")
    return "\n".join(lines) + "\n"


def _arr(a) -> list:
    return [float(v) for v in np.asarray(a, float)]


def solution_to_dict(network: Optional[Network], solution: ScopfSolution, timing: bool = False) -> dict:
    s = solution
    doc = {
        "schema": REPORT_SCHEMA,
        "case": s.case,
        "method": s.method,
        "status": s.status,
        "objective": float(s.objective),
        "passes": int(s.passes),
        "sweeps": int(s.sweeps),
        "objective_history": [float(v) for v in s.objective_history],
        "contingencies": [int(k) for k in s.contingencies],
        "islanding": [int(k) for k in s.islanding],
        "pg": _arr(s.pg),
        "shed": _arr(s.shed),
        "actions": [
            {
                "contingency": int(k),
                "st_gen": _arr(a.st_gen),
                "st_shed": _arr(a.st_shed),
                "lt_gen": _arr(a.lt_gen),
                "lt_shed": _arr(a.lt_shed),
                "lost_nodes": [int(n) for n in a.lost_nodes],
                "registered": list(a.registered),
            }
            for k, a in sorted(s.actions.items())
        ],
        "cut_log": [
            {
                "iteration": c.iteration,
                "kind": c.kind,
                "contingency": c.contingency,
                "overload": float(c.overload),
                "branch": c.branch,
                "contingency_index": c.contingency_index,
                "branch_index": c.branch_index,
            }
            for c in s.cut_log
        ],
    }
    if network is not None:
        doc["node_actions"] = {
            state: [{"contingency": c, "node": n, "change": float(v)} for c, n, v in action_table(network, s, state)]
            for state in (ST, LT)
        }
        doc["islanding_census"] = [{"outage": c, "lost_nodes": list(lost)} for c, _, lost in islanding_census(network, s)]
    if timing:
        doc["timing"] = {k: (float(v) if isinstance(v, float) else v) for k, v in s.timing.items()}
    return doc


def solution_from_dict(doc: dict) -> ScopfSolution:
    """Inverse of :func:`solution_to_dict` (derived tables are ignored)."""
    if doc.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"not a solution report: schema {doc.get('schema')!r}")
    actions = {
        int(a["contingency"]): ContingencyActions(
            np.array(a["st_gen"], float),
            np.array(a["st_shed"], float),
            np.array(a["lt_gen"], float),
            np.array(a["lt_shed"], float),
            tuple(a["lost_nodes"]),
            tuple(a["registered"]),
        )
        for a in doc["actions"]
    }
    return ScopfSolution(
        method=doc["method"],
        objective=float(doc["objective"]),
        pg=np.array(doc["pg"], float),
        shed=np.array(doc["shed"], float),
        actions=actions,
        contingencies=tuple(doc["contingencies"]),
        cut_log=[CutRecord(**c) for c in doc["cut_log"]],
        passes=int(doc["passes"]),
        sweeps=int(doc["sweeps"]),
        objective_history=list(doc["objective_history"]),
        timing=dict(doc.get("timing", {})),
        islanding=tuple(doc["islanding"]),
        status=doc["status"],
        case=doc["case"],
    )


def format_json(network: Optional[Network], solution: ScopfSolution, timing: bool = False) -> str:
    return json.dumps(solution_to_dict(network, solution, timing), indent=1) + "\n"


def load_solution(path: Union[str, Path]) -> ScopfSolution:
    return solution_from_dict(json.loads(Path(path).read_text()))


def emit_report(solution: ScopfSolution, network: Network, out: Optional[Union[str, Path]] = None,
                formats=("text", "json"), timing: bool = False) -> dict:
    """Render the report in each of ``formats`` ("text", "json").

    With ``out`` (a path stem such as ``runs/rts79``) the renderings are
    also written to ``<out>.txt`` and ``<out>.json``. Returns
    ``{format: content}``.
    """
    render = {"text": format_text, "json": format_json}
    unknown = set(formats) - set(render)
    if unknown:
        raise ValueError(f"unknown report format(s) {sorted(unknown)}")
    result = {f: render[f](network, solution, timing) for f in formats}
    if out is not None:
        stem = Path(out)
        if stem.parent and not stem.parent.exists():
            stem.parent.mkdir(parents=True, exist_ok=True)
        for f, text in result.items():
            stem.with_suffix(".txt" if f == "text" else ".json").write_text(text)
    return result
