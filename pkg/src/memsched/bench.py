"""Benchmark harness: run methods over generated corpora, emit CSV/JSON/TSV."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass

from .errors import MemschedError
from .footprint import FootprintTrace, evaluate, rpo_schedule
from .fusion import iterative_fusion
from .generators import GeneratorSpec, generate
from .ilp import build_model, model_stats
from .solver import SolverConfig, brute_force, solve

FIELDS = ("generator", "v_raw", "v_fused", "vars_free", "vars_total",
          "method", "peak", "wall_time_ms", "proven_optimal", "error")


@dataclass
class BenchReport:
    rows: list[dict]

    def to_csv(self, destination=None) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: row.get(k, "") for k in FIELDS})
        text = buf.getvalue()
        _write(destination, text)
        return text

    def to_json(self, destination=None) -> str:
        text = json.dumps(self.rows, indent=2) + "\n"
        _write(destination, text)
        return text


def run_bench(corpus, methods=("rpo", "exact"), cfg: SolverConfig | None = None,
              max_fuse: int = 20) -> BenchReport:
    """Run every method on every corpus graph; row order follows the corpus.

    Per-row failures are recorded in the ``error`` column and the run
    continues. Every reported schedule is validated against the raw graph.
    """
    if cfg is None:
        cfg = SolverConfig()
    rows = []
    for spec in corpus:
        if not isinstance(spec, GeneratorSpec):
            spec = GeneratorSpec(spec["family"], dict(spec.get("params", {})))
        label = spec.label()
        try:
            g = generate(spec)
            fused = iterative_fusion(g, max_fuse)
            stats = model_stats(build_model(fused.graph, prune=True))
            base = {
                "generator": label,
                "v_raw": g.num_ops,
                "v_fused": fused.graph.num_ops,
                "vars_free": stats["variables_free"],
                "vars_total": model_stats(build_model(g, prune=False))["variables_total"],
            }
        except MemschedError as exc:
            for method in methods:
                rows.append({"generator": label, "method": method,
                             "error": str(exc)})
            continue
        for method in methods:
            row = dict(base, method=method)
            try:
                row.update(_run_method(g, fused, method, cfg))
            except MemschedError as exc:
                row["error"] = str(exc)
            rows.append(row)
    return BenchReport(rows)


def _run_method(g, fused, method: str, cfg: SolverConfig) -> dict:
    start = time.perf_counter()
    if method == "rpo":
        sched = rpo_schedule(g)
        peak = evaluate(g, sched).peak
        proven = g.num_ops == 1
    elif method == "exact":
        res = solve(fused, cfg)
        sched = fused.expand_schedule(res.schedule)
        peak = evaluate(g, sched).peak
        proven = res.proven_optimal
    elif method == "brute":
        res = brute_force(g)
        sched = res.schedule
        peak = res.peak
        proven = True
    else:
        raise MemschedError(f"unknown method {method!r}")
    wall = time.perf_counter() - start
    evaluate(g, sched)  # re-validate: every reported schedule must be legal
    return {"peak": peak, "wall_time_ms": round(wall * 1000.0, 3),
            "proven_optimal": proven}


def emit_plot_data(obj, destination=None) -> str:
    """Columnar plot data: (step, stable, transient) or (graph, raw, fused)."""
    if isinstance(obj, FootprintTrace):
        lines = ["step\tstable\ttransient"]
        for i, t in enumerate(obj.transient):
            stable = "" if i == 0 else str(obj.stable[i - 1])
            lines.append(f"{i}\t{stable}\t{t}")
    elif isinstance(obj, BenchReport):
        lines = ["graph\traw\tfused"]
        seen = set()
        for row in obj.rows:
            label = row.get("generator", "")
            if label in seen or "v_raw" not in row:
                continue
            seen.add(label)
            lines.append(f"{label}\t{row['v_raw']}\t{row['v_fused']}")
    else:
        raise TypeError(f"cannot plot {type(obj).__name__}")
    text = "\n".join(lines) + "\n"
    _write(destination, text)
    return text


def _write(destination, text: str) -> None:
    if destination is None:
        return
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
