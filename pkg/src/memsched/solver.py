"""Exact minimum-peak scheduling.

Two exact paths: a brute-force enumerator over all topological orders (the
oracle for tiny graphs, also used to count schedule candidates) and a
best-first branch-and-bound over executed-operator sets that serves as the
production optimal scheduler. Both work on plain graphs and on fused graphs
(hypernode semantics ride on extra_size).

The search state is the set of executed operators, encoded as a bitmask;
the transient footprint is a function of that set alone, which makes the
memoization sound. The value of a state is the minimum achievable maximum
stable footprint over paths reaching it, so a Dijkstra-style expansion in
non-decreasing value order settles states exactly once.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

from .errors import IllegalSchedule, InconsistentAssignment, TooLarge
from .footprint import Schedule, evaluate, rpo_schedule
from .graph import GRAPH_INPUT, ComputationGraph

BRUTE_FORCE_LIMIT = 14


@dataclass(frozen=True)
class SolverConfig:
    """Search limits. ``seed`` only influences randomized stress harnesses."""

    time_limit: float = 30.0
    node_limit: int | None = None
    mode: str = "exact-bb"
    seed: int = 0

    def __post_init__(self):
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")


@dataclass(frozen=True)
class SolveResult:
    schedule: Schedule
    peak: int
    proven_optimal: bool
    explored_states: int
    wall_time: float

    def to_json(self) -> dict:
        return {
            "schedule": self.schedule.names(),
            "peak": self.peak,
            "proven_optimal": self.proven_optimal,
            "wall_time_ms": round(self.wall_time * 1000.0, 3),
            "explored_states": self.explored_states,
        }


class _SearchContext:
    """Precomputed per-graph arrays shared by both exact searches."""

    def __init__(self, g: ComputationGraph):
        self.g = g
        n = g.num_ops
        self.n = n
        self.out_size = [g.tensors[o.output].size for o in g.operators]
        self.extra = [o.extra_size for o in g.operators]
        self.in_tensors = [o.inputs for o in g.operators]
        self.tsize = [t.size for t in g.tensors]
        self.consumer_mask = [0] * g.num_tensors
        for t in g.tensors:
            m = 0
            for c in t.consumers:
                m |= 1 << c
            self.consumer_mask[t.id] = m
        # operator i is ready once every producer feeding it has executed
        self.pred_mask = [0] * n
        for i, o in enumerate(g.operators):
            m = 0
            for t in o.inputs:
                p = g.tensors[t].producer
                if p != GRAPH_INPUT:
                    m |= 1 << p
            self.pred_mask[i] = m
        self.t0 = sum(g.tensors[t].size for t in g.input_tensors)
        self.output_residency = sum(g.tensors[t].size for t in g.output_tensors())
        # minimal stable footprint of running op i: inputs + output + workspace
        self.working_set = [
            sum(self.tsize[t] for t in o.inputs) + self.out_size[i] + self.extra[i]
            for i, o in enumerate(g.operators)
        ]
        reach = _des_counts(g)
        self.latest_step = [n - reach[i] for i in range(n)]

    def stable(self, transient: int, op: int) -> int:
        return transient + self.out_size[op] + self.extra[op]

    def transient_after(self, mask: int, transient: int, op: int) -> int:
        """Transient footprint once ``op`` executes on top of ``mask``."""
        new_mask = mask | (1 << op)
        t = transient + self.out_size[op]
        for tid in self.in_tensors[op]:
            if self.consumer_mask[tid] & ~new_mask == 0:
                t -= self.tsize[tid]
        return t

    def ready_ops(self, mask: int) -> list[int]:
        return [i for i in range(self.n)
                if not (mask >> i) & 1 and self.pred_mask[i] & ~mask == 0]


def _des_counts(g: ComputationGraph) -> list[int]:
    from .graph import reachability

    r = reachability(g)
    return [r.des_count(i) for i in range(g.num_ops)]


def brute_force(g: ComputationGraph) -> SolveResult:
    """Enumerate every topological order; return the minimum-peak schedule.

    ``explored_states`` reports the number of legal orders, which doubles as
    the schedule-candidate count of the graph.
    """
    g = _unwrap(g)
    if g.num_ops > BRUTE_FORCE_LIMIT:
        raise TooLarge(
            f"brute force is limited to {BRUTE_FORCE_LIMIT} operators, "
            f"got {g.num_ops}")
    ctx = _SearchContext(g)
    start = time.perf_counter()
    n = ctx.n
    full = (1 << n) - 1
    best_peak: int | None = None
    best_order: tuple[int, ...] = ()
    count = 0
    order: list[int] = []

    def rec(mask: int, transient: int, cur_peak: int):
        nonlocal best_peak, best_order, count
        if mask == full:
            count += 1
            if best_peak is None or cur_peak < best_peak:
                best_peak = cur_peak
                best_order = tuple(order)
            return
        for op in ctx.ready_ops(mask):
            s = ctx.stable(transient, op)
            order.append(op)
            rec(mask | (1 << op), ctx.transient_after(mask, transient, op),
                max(cur_peak, s))
            order.pop()

    rec(0, ctx.t0, 0)
    wall = time.perf_counter() - start
    return SolveResult(Schedule(g, best_order), best_peak, True, count, wall)


def count_schedules(g: ComputationGraph, limit: int | None = None) -> int:
    """Number of legal schedules, by subset DP.

    With ``limit`` set, aborts as soon as the count provably exceeds it and
    returns the (lower-bound) layer total, which is enough for screening.
    """
    g = _unwrap(g)
    ctx = _SearchContext(g)
    counts = {0: 1}
    n = ctx.n
    for _ in range(n):
        nxt: dict[int, int] = {}
        for mask, c in counts.items():
            for op in ctx.ready_ops(mask):
                m2 = mask | (1 << op)
                nxt[m2] = nxt.get(m2, 0) + c
        counts = nxt
        # every length-k prefix completes to at least one schedule, so the
        # layer total lower-bounds the final count
        if limit is not None:
            total = sum(counts.values())
            if total > limit:
                return total
    return counts.get((1 << n) - 1, 0)


def solve(g, cfg: SolverConfig | None = None) -> SolveResult:
    """Best-first branch-and-bound for the minimum peak stable footprint.

    States are executed-operator sets; a state's value is the best peak over
    any path reaching it. Expansion follows non-decreasing value, so the
    first time the full set is popped its value is the optimum. Pruning uses
    the incumbent from the RPO and greedy seeds, a per-state lower bound
    from the largest remaining single-operator working set, and the
    ancestor/descendant step windows. On timeout the incumbent is returned
    with proven_optimal False.
    """
    if cfg is None:
        cfg = SolverConfig()
    g = _unwrap(g)
    ctx = _SearchContext(g)
    n = ctx.n
    start = time.perf_counter()
    deadline = start + cfg.time_limit

    incumbent_order = rpo_schedule(g).order
    incumbent_peak = evaluate(g, incumbent_order).peak
    greedy_order, greedy_peak = _greedy_dive(ctx)
    if greedy_peak < incumbent_peak:
        incumbent_order, incumbent_peak = greedy_order, greedy_peak

    full = (1 << n) - 1
    lower_floor = max(ctx.output_residency, ctx.t0)
    dist: dict[int, int] = {0: 0}
    tdict: dict[int, int] = {0: ctx.t0}
    parent: dict[int, tuple[int, int]] = {}
    heap: list[tuple[int, int]] = [(0, 0)]
    explored = 0
    proven = True
    wsets = sorted(((w, i) for i, w in enumerate(ctx.working_set)), reverse=True)

    while heap:
        gval, mask = heapq.heappop(heap)
        if dist.get(mask, -1) != gval:
            continue
        explored += 1
        if mask == full:
            order = _reconstruct(parent, full, n)
            sched = Schedule(g, order)
            peak = evaluate(g, sched).peak
            return SolveResult(sched, peak, True, explored,
                               time.perf_counter() - start)
        if explored % 256 == 0 and time.perf_counter() > deadline:
            proven = False
            break
        if cfg.node_limit is not None and explored >= cfg.node_limit:
            proven = False
            break
        transient = tdict[mask]
        step = mask.bit_count() + 1
        # largest working set among unexecuted ops lower-bounds any completion
        remaining_bound = lower_floor
        for w, i in wsets:
            if not (mask >> i) & 1:
                remaining_bound = max(remaining_bound, w)
                break
        if max(gval, remaining_bound) >= incumbent_peak:
            continue
        for op in ctx.ready_ops(mask):
            if step > ctx.latest_step[op]:
                continue  # too few steps left for this op's descendants
            ng = gval if gval > ctx.stable(transient, op) \
                else ctx.stable(transient, op)
            if ng >= incumbent_peak:
                continue
            m2 = mask | (1 << op)
            if dist.get(m2, incumbent_peak) <= ng:
                continue
            dist[m2] = ng
            tdict[m2] = ctx.transient_after(mask, transient, op)
            parent[m2] = (mask, op)
            heapq.heappush(heap, (ng, m2))

    # heap exhausted without reaching the goal below the incumbent, or limits
    # hit: the incumbent is the answer (optimal when the search ran dry)
    sched = Schedule(g, incumbent_order)
    return SolveResult(sched, incumbent_peak, proven, explored,
                       time.perf_counter() - start)


def _greedy_dive(ctx: _SearchContext) -> tuple[tuple[int, ...], int]:
    """Cheap incumbent: repeatedly run the ready op with the smallest stable."""
    mask = 0
    transient = ctx.t0
    order: list[int] = []
    peak = 0
    for _ in range(ctx.n):
        best = None
        for op in ctx.ready_ops(mask):
            key = (ctx.stable(transient, op),
                   ctx.transient_after(mask, transient, op), op)
            if best is None or key < best:
                best = key
        s, _, op = best
        peak = max(peak, s)
        transient = ctx.transient_after(mask, transient, op)
        mask |= 1 << op
        order.append(op)
    return tuple(order), peak


def _reconstruct(parent: dict[int, tuple[int, int]], mask: int, n: int) -> tuple[int, ...]:
    rev = []
    while mask:
        mask, op = parent[mask]
        rev.append(op)
    assert len(rev) == n
    return tuple(reversed(rev))


def decode_ilp_solution(model, assignment: dict) -> SolveResult:
    """Turn a feasible ILP assignment into a validated SolveResult.

    ``assignment`` maps variable names (O_i_j, T_i_j, mem) to values. The
    assignment is checked against every model constraint, the schedule is
    extracted from the O variables, and the decoded peak must not exceed the
    assignment's mem value.
    """
    start = time.perf_counter()
    g = model.graph
    n = g.num_ops
    violations = model.check_assignment(assignment)
    if violations:
        raise InconsistentAssignment(
            f"assignment violates constraint {violations[0]!r} "
            f"({len(violations)} total)")
    order = [-1] * n
    for i in range(n):
        for j in range(1, n + 1):
            if _binval(assignment, model.o_var(i, j), model):
                if order[j - 1] != -1:
                    raise InconsistentAssignment(
                        f"two operators scheduled in step {j}")
                order[j - 1] = i
    if any(v == -1 for v in order):
        raise InconsistentAssignment("some step has no scheduled operator")
    try:
        sched = Schedule(g, tuple(order))
    except IllegalSchedule as exc:
        raise InconsistentAssignment(f"decoded order is illegal: {exc}") from exc
    peak = evaluate(g, sched).peak
    mem = assignment.get("mem")
    if mem is not None and peak > mem + 1e-6:
        raise InconsistentAssignment(
            f"decoded peak {peak} exceeds assignment mem {mem}")
    return SolveResult(sched, peak, False, 0, time.perf_counter() - start)


def _binval(assignment: dict, var: str, model) -> bool:
    if var in model.fixed:
        return False
    return assignment.get(var, 0) > 0.5


def _unwrap(g) -> ComputationGraph:
    """Accept a ComputationGraph or anything carrying one in ``.graph``."""
    inner = getattr(g, "graph", None)
    return inner if isinstance(inner, ComputationGraph) else g
