"""Memory-aware acyclic partitioning and the partition-based pipeline.

Parts are kept in a fixed topological order: every tensor flows from a part
to the same or a later part, so each part can be scheduled independently
and sub-schedules concatenate into a legal schedule. Cut weight counts each
crossing tensor once (a multi-consumer tensor is one hyperedge).

The partition-based pipeline fuses the graph, locates the peak operator of
the RPO baseline, partitions, solves the peak part exactly and the rest by
RPO, then concatenates and expands provenance.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

from .errors import InfeasibleBalance
from .footprint import Schedule, evaluate, peak_operator, rpo_schedule
from .fusion import FusedGraph, as_fused, iterative_fusion
from .graph import GRAPH_INPUT, ComputationGraph, subgraph_as_graph
from .solver import SolveResult, SolverConfig, solve


@dataclass(frozen=True)
class PartitionPlan:
    """Ordered vertex parts with their hyperedge cut weight."""

    parts: tuple[tuple[int, ...], ...]
    cut_weight: int
    peak_part_index: int | None = None

    def part_of(self) -> dict[int, int]:
        return {v: i for i, part in enumerate(self.parts) for v in part}

    def to_json(self, g: ComputationGraph) -> dict:
        return {
            "parts": [[g.operators[v].name for v in part] for part in self.parts],
            "cut_weight": self.cut_weight,
            "peak_part_index": self.peak_part_index,
        }


def cut_weight(g: ComputationGraph, part_of: dict[int, int]) -> int:
    """Total size of tensors whose endpoints span more than one part."""
    total = 0
    for t in g.tensors:
        parts = {part_of[c] for c in t.consumers}
        if t.producer != GRAPH_INPUT:
            parts.add(part_of[t.producer])
        if len(parts) > 1:
            total += t.size
    return total


def partition_is_acyclic(g: ComputationGraph, plan: PartitionPlan) -> bool:
    """Every edge must point into the same or a later part."""
    part_of = plan.part_of()
    for t in g.tensors:
        if t.producer == GRAPH_INPUT:
            continue
        for c in t.consumers:
            if part_of[t.producer] > part_of[c]:
                return False
    return True


def naive_partition(g, k: int) -> PartitionPlan:
    """Equal contiguous intervals of the RPO order; the comparison baseline."""
    g = _unwrap(g)
    _check_k(g, k)
    order = rpo_schedule(g).order
    parts = _intervals(order, k)
    plan = PartitionPlan(parts, cut_weight(g, _part_map(parts)))
    return plan


def acyclic_partition(g, k: int, balance: float = 0.3) -> PartitionPlan:
    """Min-cut heuristic over acyclic k-way partitions.

    Starts from equal intervals of the RPO order and hill-climbs single
    vertex moves across adjacent part boundaries, accepting strict cut
    reductions that keep part sizes within the balance tolerance of |V|/k.
    """
    g = _unwrap(g)
    _check_k(g, k)
    n = g.num_ops
    target = n / k
    lo = max(1, math.floor((1 - balance) * target))
    hi = max(1, math.ceil((1 + balance) * target))
    order = rpo_schedule(g).order
    parts = _intervals(order, k)
    if any(not (lo <= len(p) <= hi) for p in parts):
        # equal intervals are the most balanced split there is
        raise InfeasibleBalance(
            f"cannot place {n} vertices into {k} parts within +/-{balance:.0%}")
    part_of = _part_map(parts)
    sizes = [len(p) for p in parts]
    best_cut = cut_weight(g, part_of)

    improved = True
    while improved:
        improved = False
        for b in range(k - 1):
            for v in range(n):
                p = part_of[v]
                move = None
                if p == b and sizes[b] > lo and sizes[b + 1] < hi and \
                        all(part_of[s] != b for s in g.successors(v)):
                    move = b + 1
                elif p == b + 1 and sizes[b + 1] > lo and sizes[b] < hi and \
                        all(part_of[q] != b + 1 for q in g.predecessors(v)):
                    move = b
                if move is None:
                    continue
                part_of[v] = move
                new_cut = cut_weight(g, part_of)
                if new_cut < best_cut:
                    best_cut = new_cut
                    sizes[p] -= 1
                    sizes[move] += 1
                    improved = True
                else:
                    part_of[v] = p

    grouped = [[] for _ in range(k)]
    for v in order:
        grouped[part_of[v]].append(v)
    parts = tuple(tuple(sorted(p)) for p in grouped)
    return PartitionPlan(parts, best_cut)


@dataclass(frozen=True)
class PartitionedRun:
    """Everything the partition pipeline produced, for reporting."""

    result: SolveResult
    plan: PartitionPlan
    fused: FusedGraph


def partitioned_schedule(g, k: int, cfg: SolverConfig | None = None,
                         max_fuse: int = 20) -> SolveResult:
    return partitioned_run(g, k, cfg, max_fuse).result


def partitioned_run(g, k: int, cfg: SolverConfig | None = None,
                    max_fuse: int = 20) -> PartitionedRun:
    """Fuse, locate the RPO peak, partition, schedule parts, concatenate."""
    if cfg is None:
        cfg = SolverConfig()
    start = time.perf_counter()
    fused = iterative_fusion(g, max_fuse) if not isinstance(g, FusedGraph) else g
    fg = fused.graph
    k = min(k, fg.num_ops)
    rpo = rpo_schedule(fg)
    peak_op = peak_operator(fg, rpo)
    plan = acyclic_partition(fg, k)
    peak_idx = next(i for i, part in enumerate(plan.parts) if peak_op in part)
    plan = replace(plan, peak_part_index=peak_idx)

    order: list[int] = []
    explored = 0
    proven_parts = True
    for idx, part in enumerate(plan.parts):
        sub, op_map, _ = subgraph_as_graph(fg, part)
        inv = {loc: glob for glob, loc in op_map.items()}
        if idx == peak_idx:
            res = solve(sub, cfg)
            explored += res.explored_states
            proven_parts = proven_parts and res.proven_optimal
            local = res.schedule.order
        else:
            local = rpo_schedule(sub).order
        order.extend(inv[v] for v in local)

    sched = fused.expand_schedule(order)
    peak = evaluate(fused.origin, sched).peak
    proven = k == 1 and proven_parts
    result = SolveResult(sched, peak, proven, explored,
                         time.perf_counter() - start)
    return PartitionedRun(result, plan, fused)


def _intervals(order, k: int) -> tuple[tuple[int, ...], ...]:
    n = len(order)
    base, extra = divmod(n, k)
    parts = []
    at = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        parts.append(tuple(sorted(order[at:at + size])))
        at += size
    return tuple(parts)


def _part_map(parts) -> dict[int, int]:
    return {v: i for i, part in enumerate(parts) for v in part}


def _check_k(g: ComputationGraph, k: int) -> None:
    if not (1 <= k <= g.num_ops):
        raise ValueError(f"k must be in [1, {g.num_ops}], got {k}")


def _unwrap(g) -> ComputationGraph:
    return g.graph if isinstance(g, FusedGraph) else g
