"""Schedules and their stable/transient memory footprints.

A schedule assigns each operator a step in 1..|V|. Executing step i leaves
2|V|+1 observable memory states: the stable footprint s^i while operator
sigma(i) runs (all live tensors plus that operator's workspace) and the
transient footprint t^i between steps i and i+1 (tensors still awaiting
consumers). t^0 is the total graph-input size. The scheduling objective is
to minimize max_i s^i.

Liveness rules: a tensor is live from its producer's step (step 0 for graph
inputs) through its last consumer's step; tensors with no consumers are
graph outputs and stay live through step |V|. The executing operator's
output is part of the liveness sum, so only extra_size is added on top.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import IllegalSchedule
from .graph import GRAPH_INPUT, ComputationGraph


@dataclass(frozen=True)
class Schedule:
    """A bijection between operators and steps, legal for its graph."""

    graph: ComputationGraph
    order: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(self.order))
        validate_schedule(self.graph, self.order)

    def step_of(self, op: int) -> int:
        """1-based step at which ``op`` executes."""
        return self.order.index(op) + 1

    def names(self) -> list[str]:
        return [self.graph.operators[v].name for v in self.order]


@dataclass(frozen=True)
class FootprintTrace:
    """The 2|V|+1 memory states of a schedule.

    ``stable[i-1]`` is s^i for steps 1..|V|; ``transient[i]`` is t^i for
    0..|V|. ``peak_step`` is the first 1-based step attaining the peak.
    """

    stable: tuple[int, ...]
    transient: tuple[int, ...]
    peak: int
    peak_step: int

    def to_json(self, unit: str = "units") -> dict:
        return {"stable": list(self.stable), "transient": list(self.transient),
                "peak": self.peak, "peak_step": self.peak_step, "unit": unit}


def validate_schedule(g: ComputationGraph, order: Sequence[int]) -> None:
    """Raise IllegalSchedule unless ``order`` is a legal topological order."""
    n = g.num_ops
    if sorted(order) != list(range(n)):
        raise IllegalSchedule(f"order is not a permutation of 0..{n - 1}")
    pos = {v: i for i, v in enumerate(order)}
    for t in g.tensors:
        if t.producer == GRAPH_INPUT:
            continue
        for c in t.consumers:
            if pos[t.producer] >= pos[c]:
                raise IllegalSchedule(
                    f"operator {g.operators[c].name!r} consumes tensor "
                    f"{t.name!r} before its producer "
                    f"{g.operators[t.producer].name!r} runs")


def evaluate(g: ComputationGraph, sched: Schedule | Sequence[int]) -> FootprintTrace:
    """Compute the full stable/transient trace of a legal schedule."""
    order = sched.order if isinstance(sched, Schedule) else tuple(sched)
    if not isinstance(sched, Schedule):
        validate_schedule(g, order)
    n = g.num_ops
    step = {v: i + 1 for i, v in enumerate(order)}

    # Per-tensor residency intervals over stable steps (1..n) and transient
    # states (0..n), accumulated with difference arrays.
    s_diff = [0] * (n + 2)
    t_diff = [0] * (n + 2)
    for t in g.tensors:
        start = 0 if t.producer == GRAPH_INPUT else step[t.producer]
        if t.consumers:
            last_use = max(step[c] for c in t.consumers)
            s_end = last_use
            t_end = last_use - 1  # freed once its last consumer finishes
        else:
            s_end = n
            t_end = n  # graph outputs stay resident
        s_diff[max(start, 1)] += t.size
        s_diff[s_end + 1] -= t.size
        if t_end >= start:
            t_diff[start] += t.size
            t_diff[t_end + 1] -= t.size

    stable = []
    acc = 0
    for i in range(1, n + 1):
        acc += s_diff[i]
        stable.append(acc + g.operators[order[i - 1]].extra_size)
    transient = []
    acc = 0
    for i in range(0, n + 1):
        acc += t_diff[i]
        transient.append(acc)

    peak = max(stable)
    peak_step = stable.index(peak) + 1
    return FootprintTrace(tuple(stable), tuple(transient), peak, peak_step)


def rpo_schedule(g: ComputationGraph) -> Schedule:
    """Deterministic reverse-post-order baseline schedule.

    DFS from the producers of graph outputs along input edges, visiting
    predecessor operators in ascending id order; emitting operators in
    post-order yields a topological order of the graph.
    """
    n = g.num_ops
    roots = sorted({g.tensors[t].producer for t in g.output_tensors()})
    visited = [False] * n
    out: list[int] = []
    for root in roots:
        if visited[root]:
            continue
        visited[root] = True
        stack = [(root, iter(g.predecessors(root)))]
        while stack:
            node, it = stack[-1]
            advanced = False
            for p in it:
                if not visited[p]:
                    visited[p] = True
                    stack.append((p, iter(g.predecessors(p))))
                    advanced = True
                    break
            if not advanced:
                out.append(node)
                stack.pop()
    # isolated source ops whose outputs feed nothing reachable were covered
    # above (every operator reaches some graph output in a valid graph)
    return Schedule(g, tuple(out))


def peak_operator(g: ComputationGraph, sched: Schedule) -> int:
    """Operator executing at the first peak step (earliest-step tie-break)."""
    trace = evaluate(g, sched)
    return sched.order[trace.peak_step - 1]
