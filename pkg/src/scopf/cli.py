"""Command-line front end: ``scopf solve|screen|verify|bench|gen``.

Exit codes: 0 on success, 1 when a solve fails or a solution does not
verify, 2 on usage errors (bad flags, unreadable case files).
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cases import generate_synthetic, load_case, save_case
from .errors import CaseFormatError, ScopfError
from .grid import GridMatrices
from .imml import screen_all
from .report import emit_report, format_text, load_solution
from .solver import ScopfOptions, build_base_opf, solve_benders, solve_extensive, verify_solution

log = logging.getLogger("scopf")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SOLVERS = {"benders": solve_benders, "extensive": solve_extensive}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by itself; raise instead so main() stays in charge
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_case(p):
    p.add_argument("--case", required=True, help="case file (.json or MATPOWER .m) or a bundled name such as rts79")


def _add_options(p):
    p.add_argument("--parallel", action="store_true", help="screen contingencies on a thread pool")
    p.add_argument("--dt-lt", type=float, default=15.0, metavar="MIN",
                   help="minutes from outage to the long-term state (default 15)")
    p.add_argument("--max-passes", type=int, default=None, metavar="N", help="cap on Benders passes")
    p.add_argument("--backend", choices=("highs", "scipy", "simplex"), default="highs", help="LP backend")
    p.add_argument("--preventive", action="store_true", help="preventive-only security (no corrective actions)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scopf", description="DC security-constrained OPF by IMML screening and Benders cuts.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve a case and emit a report")
    _add_case(p)
    p.add_argument("--method", choices=sorted(SOLVERS), default="benders")
    p.add_argument("--out", metavar="STEM", help="write STEM.txt and STEM.json")
    p.add_argument("--timing", action="store_true", help="include wall-clock timing in the report")
    _add_options(p)

    p = sub.add_parser("screen", help="overload census of the base dispatch under every single-branch outage")
    _add_case(p)
    p.add_argument("--parallel", action="store_true")

    p = sub.add_parser("verify", help="re-check a solution file against its case")
    _add_case(p)
    p.add_argument("--solution", required=True, help="JSON report written by 'solve --out'")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--dt-lt", type=float, default=15.0, metavar="MIN")
    p.add_argument("--preventive", action="store_true")

    p = sub.add_parser("bench", help="solve with both methods and compare cost and run time")
    _add_case(p)
    p.add_argument("--repeat", type=int, default=1, help="runs per method; the fastest is reported")
    _add_options(p)

    p = sub.add_parser("gen", help="write a seeded synthetic case")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--branches", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radial-fraction", type=float, default=0.35)
    p.add_argument("--out", required=True, help="output .json path")
    return parser


def _options(args) -> ScopfOptions:
    return ScopfOptions(
        dt_lt=args.dt_lt,
        corrective=not getattr(args, "preventive", False),
        parallel=getattr(args, "parallel", False),
        max_passes=getattr(args, "max_passes", None),
        backend=getattr(args, "backend", "highs"),
    )


def _load(path):
    try:
        return load_case(path)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    except CaseFormatError as exc:
        raise UsageError(f"bad case file: {exc}") from exc


def cmd_solve(args) -> int:
    network = _load(args.case)
    solution = SOLVERS[args.method](network, options=_options(args))
    out = emit_report(solution, network, out=args.out, formats=("text", "json"), timing=args.timing)
    sys.stdout.write(out["text"])
    if args.out:
        log.info("wrote %s.txt and %s.json", args.out, args.out)
    return EXIT_OK


def cmd_screen(args) -> int:
    network = _load(args.case)
    main = build_base_opf(network)
    main.solve()
    P = network.injections(main.pg, main.shed)
    mats = GridMatrices.from_network(network)
    theta = mats.angles(P)
    results = screen_all(network, mats, theta, limits=network.rate_lt, injections=P, parallel=args.parallel)
    rows = []
    for r in results:
        for ov in r.overloads:
            rows.append((network.branch_label(r.outage.branch), network.branch_label(ov.branch), ov.flow, ov.limit, ov.excess))
    islands = sum(r.islanding for r in results)
    print(f"case {network.name}: base objective {main.objective:.6f}")
    print(f"{len(results)} outages screened, {islands} islanding, "
          f"{len({r[0] for r in rows})} with long-term overloads, {len(rows)} overloads")
    if rows:
        print()
        print(f"{'outage':<10} {'branch':<10} {'flow':>10} {'limit':>10} {'overload':>10}")
        for c, b, f, lim, ex in rows:
            print(f"{c:<10} {b:<10} {f:10.4f} {lim:10.4f} {ex:10.4f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    network = _load(args.case)
    try:
        solution = load_solution(args.solution)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read solution {args.solution}: {exc}") from exc
    if len(solution.pg) != len(network.generators):
        raise UsageError(f"solution has {len(solution.pg)} generators, case has {len(network.generators)}")
    report = verify_solution(network, solution, options=_options(args), tol=args.tol)
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_bench(args) -> int:
    network = _load(args.case)
    options = _options(args)
    rows = []
    for method, solve in SOLVERS.items():
        best = None
        for _ in range(max(1, args.repeat)):
            t0 = time.perf_counter()
            sol = solve(network, options=options)
            wall = time.perf_counter() - t0
            if best is None or wall < best[1]:
                best = (sol, wall)
        rows.append((method, *best))
    print(f"case {network.name}: {network.n_nodes} nodes, {network.n_branches} branches")
    print()
    head = f"{'method':<10} {'objective':>14} {'time [s]':>10} {'solver':>8} {'flow/PTDF':>10} {'LP solves':>10} {'passes':>7} {'cuts':>6}"
    print(head)
    print("-" * len(head))
    for method, sol, wall in rows:
        t = sol.timing
        solver = 100.0 * t.get("solver", 0.0) / wall if wall > 0 else 0.0
        flow = 100.0 * t.get("flow_ptdf", 0.0) / wall if wall > 0 else 0.0
        print(f"{method:<10} {sol.objective:14.4f} {wall:10.3f} {solver:7.1f}% {flow:9.1f}% "
              f"{t.get('solves', 0):10d} {sol.passes:7d} {len(sol.cut_log):6d}")
    (_, b, tb), (_, e, te) = rows
    gap = abs(b.objective - e.objective) / max(abs(e.objective), 1e-12)
    print()
    print(f"relative cost gap {gap:.2e}; benders/extensive time ratio {tb / te:.3f}")
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        network = generate_synthetic(args.nodes, args.branches, seed=args.seed, radial_fraction=args.radial_fraction)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    path = save_case(network, args.out)
    print(f"wrote {path}: {network.n_nodes} nodes, {network.n_branches} branches, "
          f"{len(network.generators)} generators, {len(network.demands)} demands")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "screen": cmd_screen, "verify": cmd_verify, "bench": cmd_bench, "gen": cmd_gen}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except ScopfError as exc:
        print(f"scopf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
