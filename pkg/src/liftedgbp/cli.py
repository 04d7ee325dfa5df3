"""Command-line front end.

``liftedgbp run`` loads a model (a ``.prm`` file or a benchmark name), runs
one engine and writes a JSON report; ``liftedgbp export-graph`` writes region
graphs as DOT and JSON. Exit codes: 0 success, 2 no convergence (the report is
still written), 1 bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

from .benchmarks import ALL, resolve_model
from .compare import run_lockstep
from .errors import LiftedGBPError, NoContainingRegion
from .exact import exact_marginal
from .factor import FactorTable
from .ground_gbp import DEFAULT_DAMPING, DEFAULT_ITERS, DEFAULT_TOL, run_ground_gbp
from .lifted_gbp import RunConfig, query_marginal, representative_atom, run_lifted_gbp
from .lifted_graph import build_lifted_region_graph
from .local_graph import local_par_counts
from .model import GroundAtom, ParfactorModel, ground, parse_ground_atom, shatter
from .region_graph import CLOSURES, build_region_graph

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2

log = logging.getLogger("liftedgbp")


def _parse_queries(model: ParfactorModel, queries: list) -> list:
    """Ground atoms or predicate names; every predicate when none are given."""
    if not queries:
        return sorted(model.predicates)
    out = []
    for q in queries:
        if "(" in q:
            out.append(parse_ground_atom(model, q))
        elif q in model.predicates:
            out.append(q)
        else:
            raise NoContainingRegion(f"unknown predicate {q!r}")
    return out


def _query_atom(model: ParfactorModel, q) -> GroundAtom:
    return q if isinstance(q, GroundAtom) else representative_atom(model.arg_domains(), q)


def _key(q) -> str:
    return q if isinstance(q, str) else str(q)


def ground_query(beliefs: list, graph, atom: GroundAtom) -> FactorTable:
    """Marginal of ``atom`` from the smallest ground region containing it."""
    best = None
    for b in beliefs:
        if atom in b.scope and (best is None or len(b.scope) < len(best.scope)):
            best = b
    if best is None:
        raise NoContainingRegion(f"no region contains {atom}")
    return best.marginalize_sum([atom])


def _marginals(tables: dict) -> dict:
    return {k: [round(float(p), 12) for p in t.natural().reshape(-1)] for k, t in tables.items()}


def _write_trace(path: str, trace: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "max_residual"])
        for i, r in enumerate(trace, start=1):
            w.writerow([i, repr(float(r))])


def beliefs_json(tables: list) -> dict:
    regions = []
    for i, t in enumerate(tables):
        nat = t.natural().reshape(-1)
        regions.append({"id": i, "atoms": [str(a) for a in t.scope],
                        "belief": nat.tolist(), "total": float(nat.sum())})
    return {"schemaVersion": SCHEMA_VERSION, "regions": regions}


def _ground_graph(model: ParfactorModel, closure: str):
    mrf = ground(model)
    return build_region_graph(mrf=mrf, closure=closure)


def cmd_run(args) -> int:
    model = shatter(resolve_model(args.model))
    if args.n is not None:
        model = model.with_domain_size(args.n)
    queries = _parse_queries(model, args.query)
    report: dict = {"schemaVersion": SCHEMA_VERSION, "model": args.model, "mode": args.mode,
                    "n": model.domain_sizes(), "damping": args.damping, "tolerance": args.tol}
    trace, beliefs = [], []
    start = time.perf_counter()

    if args.mode == "exact":
        mrf = ground(model)
        tables = {_key(q): exact_marginal(mrf, [_query_atom(model, q)]) for q in queries}
        converged, iterations = True, 0
    elif args.mode == "ground":
        graph = _ground_graph(model, args.closure)
        res = run_ground_gbp(graph, args.iters, args.damping, args.tol, threads=args.threads)
        tables = {_key(q): ground_query(res.beliefs, graph, _query_atom(model, q)) for q in queries}
        converged, iterations, trace, beliefs = res.converged, res.iterations, res.trace, res.beliefs
    elif args.mode == "lifted":
        lifted = build_lifted_region_graph(model)
        res = run_lifted_gbp(lifted, RunConfig(model.domain_sizes(), args.iters, args.damping, args.tol),
                             threads=args.threads)
        tables = {_key(q): query_marginal(res.beliefs, lifted, q) for q in queries}
        converged, iterations, trace, beliefs = res.converged, res.iterations, res.trace, res.beliefs
    else:
        if args.closure != "subsets":
            raise ValueError("compare mode needs --closure subsets (the graph the lifted one compresses)")
        graph = _ground_graph(model, "subsets")
        lifted = build_lifted_region_graph(model)
        res = run_lockstep(graph, lifted, model.domain_sizes(), args.iters, args.damping, args.tol)
        tables = {_key(q): query_marginal(res.lifted_beliefs, lifted, q) for q in queries}
        ground_tables = {_key(q): ground_query(res.ground_beliefs, graph, _query_atom(model, q))
                         for q in queries}
        report["groundMarginals"] = _marginals(ground_tables)
        report["maxDiscrepancy"] = res.max_discrepancy
        converged, iterations = res.converged, len(res.lifted_trace)
        trace, beliefs = res.lifted_trace, res.lifted_beliefs

    report["converged"] = bool(converged)
    report["iterations"] = iterations
    report["marginals"] = _marginals(tables)
    if args.timing:
        report["wallTimeSec"] = time.perf_counter() - start
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.trace:
        _write_trace(args.trace, trace)
    if args.beliefs:
        Path(args.beliefs).write_text(json.dumps(beliefs_json(beliefs), indent=2) + "\n")
    if not converged:
        print(f"did not converge after {iterations} iterations", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_export_graph(args) -> int:
    model = shatter(resolve_model(args.model))
    if args.n is not None:
        model = model.with_domain_size(args.n)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if args.kind in ("lifted", "both"):
        lifted = build_lifted_region_graph(model)
        (out / "lifted.dot").write_text(lifted.to_dot() + "\n")
        (out / "lifted.json").write_text(lifted.to_json(indent=2) + "\n")
        tables = [local_par_counts(a, lifted).to_dict() for a in range(len(lifted.regions))]
        (out / "local_par.json").write_text(json.dumps(tables, indent=2) + "\n")
        written += ["lifted.dot", "lifted.json", "local_par.json"]
    if args.kind in ("ground", "both"):
        graph = _ground_graph(model, args.closure)
        (out / "ground.dot").write_text(graph.to_dot() + "\n")
        (out / "ground.json").write_text(graph.to_json(indent=2) + "\n")
        written += ["ground.dot", "ground.json"]
    for name in written:
        print(out / name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liftedgbp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run inference and write a JSON report")
    run.add_argument("--model", required=True, help=f"model file or benchmark ({', '.join(ALL)})")
    run.add_argument("--mode", choices=("exact", "ground", "lifted", "compare"), default="lifted")
    run.add_argument("--n", type=int, help="domain size (overrides the model file)")
    run.add_argument("--iters", type=int, default=DEFAULT_ITERS)
    run.add_argument("--damping", type=float, default=DEFAULT_DAMPING)
    run.add_argument("--tol", type=float, default=DEFAULT_TOL)
    run.add_argument("--query", action="append", default=[],
                     help="ground atom like friends(1,2) or a predicate name; repeatable")
    run.add_argument("--closure", choices=CLOSURES, default="subsets",
                     help="ground region graph construction (ground and compare modes)")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--out", help="report path (default: stdout)")
    run.add_argument("--trace", help="CSV of the max message residual per iteration")
    run.add_argument("--beliefs", help="JSON of the final region beliefs")
    run.add_argument("--timing", action="store_true", help="add wall time to the report")
    run.set_defaults(func=cmd_run)

    exp = sub.add_parser("export-graph", help="write region graphs as DOT and JSON")
    exp.add_argument("--model", required=True)
    exp.add_argument("--kind", choices=("lifted", "ground", "both"), default="lifted")
    exp.add_argument("--n", type=int, help="domain size for the ground graph")
    exp.add_argument("--closure", choices=CLOSURES, default="subsets")
    exp.add_argument("--out-dir", default=".")
    exp.set_defaults(func=cmd_export_graph)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "iters", 0) < 0 or getattr(args, "threads", 1) < 1:
        print("error: --iters must be >= 0 and --threads >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (LiftedGBPError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
