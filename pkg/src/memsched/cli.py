"""Command line interface: schedule, gen, and bench subcommands."""

from __future__ import annotations

import argparse
import json
import sys
import time

from .bench import BenchReport, emit_plot_data, run_bench
from .errors import MemschedError
from .footprint import evaluate, rpo_schedule
from .fusion import iterative_fusion
from .generators import FAMILIES, GeneratorSpec, generate
from .graph import dump_graph, load_graph
from .ilp import build_model, export_lp
from .partition import partitioned_run
from .solver import SolveResult, SolverConfig, brute_force, solve


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except MemschedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memsched",
        description="Peak-memory-aware operator scheduling for computation graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", help="schedule a graph document")
    p.add_argument("--input", required=True, help="graph JSON file")
    p.add_argument("--method", choices=("rpo", "exact", "brute"), default="exact")
    p.add_argument("--fuse", action="store_true",
                   help="contract the graph with iterative fusion first")
    p.add_argument("--prune", action="store_true",
                   help="apply topology-aware variable pruning to the ILP export")
    p.add_argument("--partition", type=int, metavar="K",
                   help="run the partition-based pipeline with K parts")
    p.add_argument("--max-fuse", type=int, default=20, metavar="M",
                   help="maximum fused sub-graph size (default 20)")
    p.add_argument("--time-limit", type=float, default=30.0, metavar="S")
    p.add_argument("--emit-lp", metavar="PATH", help="write the ILP in LP format")
    p.add_argument("--report", metavar="PATH", help="write the fusion report JSON")
    p.add_argument("--plot-data", metavar="PATH",
                   help="write the schedule's footprint trace as TSV")
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("gen", help="generate a benchmark graph")
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--out", required=True, help="output graph JSON file")
    p.add_argument("--depth", type=int)
    p.add_argument("--blocks", type=int)
    p.add_argument("--branches", type=int)
    p.add_argument("--cells", type=int)
    p.add_argument("--units", type=int)
    p.add_argument("--nodes", type=int, help="operator count for random-dag")
    p.add_argument("--size", type=int, help="base tensor size")
    p.add_argument("--seed", type=int)
    p.add_argument("--cross-fuse", action="store_true",
                   help="append the cross-branch exchange stage (hrnet family)")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("bench", help="run a corpus of generated graphs")
    p.add_argument("--corpus", required=True, help="corpus JSON file")
    p.add_argument("--out", required=True, help="output CSV file")
    p.add_argument("--json", metavar="PATH", help="also write rows as JSON")
    p.add_argument("--plot-data", metavar="PATH", help="write scale TSV")
    p.add_argument("--methods", default=None,
                   help="comma-separated methods (default rpo,exact)")
    p.add_argument("--time-limit", type=float, default=30.0)
    p.add_argument("--max-fuse", type=int, default=20)
    p.set_defaults(func=_cmd_bench)
    return parser


def _cmd_schedule(args) -> int:
    g = load_graph(args.input)
    cfg = SolverConfig(time_limit=args.time_limit)
    fused = None
    extra_output = {}

    if args.partition:
        run = partitioned_run(g, args.partition, cfg, args.max_fuse)
        result, fused = run.result, run.fused
        extra_output["partition"] = run.plan.to_json(fused.graph)
    else:
        if args.fuse:
            fused = iterative_fusion(g, args.max_fuse)
        work = fused if fused is not None else g
        if args.method == "rpo":
            start = time.perf_counter()
            sched = rpo_schedule(fused.graph if fused else g)
            result = SolveResult(sched, 0, g.num_ops == 1, 0,
                                 time.perf_counter() - start)
        elif args.method == "brute":
            result = brute_force(work)
        else:
            result = solve(work, cfg)
        if fused is not None:
            sched = fused.expand_schedule(result.schedule)
        else:
            sched = result.schedule
        result = SolveResult(sched, evaluate(g, sched).peak,
                             result.proven_optimal,
                             result.explored_states, result.wall_time)

    if args.emit_lp:
        target = fused.graph if fused is not None else g
        export_lp(build_model(target, prune=args.prune), args.emit_lp)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(fused.report() if fused is not None else [], fh, indent=2)
            fh.write("\n")
    if args.plot_data:
        emit_plot_data(evaluate(g, result.schedule), args.plot_data)

    out = result.to_json()
    out.update(extra_output)
    print(json.dumps(out, indent=2))
    return 0


_GEN_PARAMS = {
    "depth": "depth", "blocks": "blocks", "branches": "branches",
    "cells": "cells", "units": "units", "nodes": "n", "size": "size",
    "seed": "seed",
}


def _cmd_gen(args) -> int:
    params = {}
    for flag, key in _GEN_PARAMS.items():
        value = getattr(args, flag)
        if value is not None:
            params[key] = value
    if args.cross_fuse:
        params["cross_fuse"] = True
    g = generate(args.family, **params)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(dump_graph(g), fh, indent=2)
        fh.write("\n")
    print(f"wrote {args.family} graph with {g.num_ops} operators to {args.out}")
    return 0


def _cmd_bench(args) -> int:
    with open(args.corpus, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, dict):
        specs = doc.get("graphs", [])
        methods = doc.get("methods", ["rpo", "exact"])
    else:
        specs = doc
        methods = ["rpo", "exact"]
    if args.methods:
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    corpus = [GeneratorSpec(s["family"], dict(s.get("params", {})))
              for s in specs]
    report = run_bench(corpus, methods, SolverConfig(time_limit=args.time_limit),
                       args.max_fuse)
    report.to_csv(args.out)
    if args.json:
        report.to_json(args.json)
    if args.plot_data:
        emit_plot_data(report, args.plot_data)
    errors = sum(1 for r in report.rows if r.get("error"))
    print(f"wrote {len(report.rows)} rows to {args.out}"
          + (f" ({errors} errors)" if errors else ""))
    return 0


if __name__ == "__main__":
    sys.exit(main())
