"""Optimality-preserving sub-graph fusion.

Fusing contracts an isolated sub-graph into a single hypernode with a frozen
internal schedule. The hypernode carries the internal peak (mem_g) through
its extra_size, set to mem_g - input_size - output_size, so evaluating the
contracted graph reproduces the original footprint exactly at every step.

Two legality routes preserve the optimal peak:

* monotone linear chains: the transient profile is non-decreasing with every
  stable state dominated by the last (fuse late), or non-increasing with
  every stable state dominated by the first (fuse early);
* general isolated sub-graphs: every partial execution front must hold at
  least as much memory as both boundary tensors. The condition is checked
  over all downward-closed vertex subsets, not just one internal order:
  checking a single order is not enough, because an adversarial schedule of
  the surrounding graph can interleave through a front the chosen order
  never visits. The frozen internal order is the optimal one.

The iterative driver grows a candidate set from each tensor's consumers and
fuses the first legal candidate, repeating to a fixed point.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

from .errors import CheckFailed, NegativeFootprint, NotLinear, WouldCreateCycle
from .footprint import Schedule, evaluate, validate_schedule
from .graph import (
    GRAPH_INPUT,
    ComputationGraph,
    OperatorSpec,
    TensorSpec,
    is_isolated_subgraph,
    reachability,
    subgraph_as_graph,
)
from .solver import SolverConfig, _SearchContext, solve

DOMINANCE_STATE_BUDGET = 200_000


@dataclass(frozen=True)
class FusionRecord:
    """Frozen accounting for one hypernode."""

    hypernode: str
    members: tuple[str, ...]       # member names at fuse time, execution order
    original_ops: tuple[int, ...]  # expanded original operator ids, execution order
    internal_peak: int             # mem_g of the frozen internal schedule
    input_size: int
    output_size: int
    transient_profile: tuple[int, ...]
    cycle: int


@dataclass(frozen=True)
class FusionCheck:
    """Outcome of a fusion legality check."""

    fusable: bool
    kind: str = ""        # monotone-increasing | monotone-decreasing | general
    reason: str = ""
    internal_order: tuple[int, ...] = ()
    mem_g: int | None = None
    profile: tuple[int, ...] = ()

    def __bool__(self) -> bool:
        return self.fusable


class FusedGraph:
    """A contracted graph plus provenance back to the original operators."""

    def __init__(self, origin: ComputationGraph, graph: ComputationGraph,
                 op_origin, records, history):
        self.origin = origin
        self.graph = graph
        self.op_origin = tuple(tuple(o) for o in op_origin)
        self.records = dict(records)      # current op id -> FusionRecord
        self.history = tuple(history)     # every record ever created
        self.unit = graph.unit

    @property
    def num_ops(self) -> int:
        return self.graph.num_ops

    def is_hypernode(self, op: int) -> bool:
        return op in self.records

    def expand(self, order) -> tuple[int, ...]:
        """Original-operator order realizing a schedule of the fused graph."""
        if isinstance(order, Schedule):
            order = order.order
        out = []
        for v in order:
            out.extend(self.op_origin[v])
        return tuple(out)

    def expand_schedule(self, order) -> Schedule:
        return Schedule(self.origin, self.expand(order))

    def report(self) -> list[dict]:
        return [{"hypernode": r.hypernode, "members": list(r.members),
                 "mem_g": r.internal_peak, "cycle": r.cycle}
                for r in self.history]


def as_fused(g) -> FusedGraph:
    """Wrap a plain graph as a FusedGraph with identity provenance."""
    if isinstance(g, FusedGraph):
        return g
    return FusedGraph(g, g, [(i,) for i in range(g.num_ops)], {}, ())


def hypernode_stable_footprint(record: FusionRecord, live_context: int) -> int:
    """Stable footprint at the hypernode's step given the surrounding context.

    ``live_context`` is the total size of tensors live across the step,
    including the hypernode's own input and output tensors; the internal
    peak replaces the boundary pair.
    """
    value = live_context + record.internal_peak \
        - record.input_size - record.output_size
    if value < 0:
        raise NegativeFootprint(
            f"hypernode {record.hypernode} yields footprint {value}")
    return value


def check_monotonic_linear(g, sequence) -> FusionCheck:
    """Theorem-style monotone chain test.

    The sequence must be a linear chain forming an isolated sub-graph (each
    interior tensor has a single consumer, the chain input feeds only the
    first member); otherwise NotLinear is raised. Plateaus count as
    monotone.
    """
    fused = as_fused(g)
    g = fused.graph
    seq = tuple(sequence)
    if len(seq) < 2:
        raise NotLinear("a chain needs at least two operators")
    for a, b in itertools.pairwise(seq):
        t = g.tensors[g.operators[a].output]
        if t.consumers != (b,):
            raise NotLinear(
                f"tensor {t.name!r} does not link {g.operators[a].name!r} "
                f"to exactly {g.operators[b].name!r}")
    iso = is_isolated_subgraph(g, seq)
    if not iso:
        raise NotLinear(f"chain is not an isolated sub-graph ({iso.reason})")

    sub, op_map, _ = subgraph_as_graph(g, seq)
    local = tuple(op_map[v] for v in seq)
    trace = evaluate(sub, local)
    t = trace.transient
    s = trace.stable
    increasing = all(t[i] <= t[i + 1] for i in range(len(t) - 1))
    decreasing = all(t[i] >= t[i + 1] for i in range(len(t) - 1))
    if increasing and max(s) == s[-1]:
        return FusionCheck(True, "monotone-increasing", "", seq, trace.peak, t)
    if decreasing and max(s) == s[0]:
        return FusionCheck(True, "monotone-decreasing", "", seq, trace.peak, t)
    return FusionCheck(False, "", "non-monotone", seq, trace.peak, t)


def check_general_fusable(g, members, cfg: SolverConfig | None = None) -> FusionCheck:
    """Isolation plus boundary dominance over every execution front.

    On success the returned check carries the optimal internal schedule and
    its mem_g.
    """
    fused = as_fused(g)
    g = fused.graph
    mset = frozenset(members)
    if len(mset) < 2:
        return FusionCheck(False, reason="too-small")
    iso = is_isolated_subgraph(g, mset)
    if not iso:
        return FusionCheck(False, reason=f"not-isolated ({iso.reason})")
    sub, op_map, _ = subgraph_as_graph(g, mset)
    ok, reason = _boundary_dominance(sub)
    if not ok:
        return FusionCheck(False, reason=reason)
    res = solve(sub, cfg or SolverConfig())
    inv = {loc: glob for glob, loc in op_map.items()}
    order = tuple(inv[v] for v in res.schedule.order)
    profile = evaluate(sub, res.schedule).transient
    return FusionCheck(True, "general", "", order, res.peak, profile)


def _boundary_dominance(sub: ComputationGraph) -> tuple[bool, str]:
    """Every proper execution front must hold >= both boundary tensors.

    Fronts are downward-closed member subsets; their transient footprint is
    order-independent, so this covers every internal schedule at once.
    """
    ctx = _SearchContext(sub)
    t0 = ctx.t0
    tn = ctx.output_residency
    full = (1 << ctx.n) - 1
    seen = {0}
    stack = [(0, t0)]
    while stack:
        mask, tr = stack.pop()
        for op in ctx.ready_ops(mask):
            m2 = mask | (1 << op)
            if m2 in seen or m2 == full:
                continue
            seen.add(m2)
            if len(seen) > DOMINANCE_STATE_BUDGET:
                return False, "verification-budget-exceeded"
            t2 = ctx.transient_after(mask, tr, op)
            if t2 < t0:
                return False, "interior-dip-below-input"
            if t2 < tn:
                return False, "interior-dip-below-output"
            stack.append((m2, t2))
    return True, ""


def fuse(g, members, internal_order) -> FusedGraph:
    """Contract ``members`` into a hypernode with the given internal order.

    ``members`` and ``internal_order`` use the current graph's operator ids.
    The set must be an isolated sub-graph (WouldCreateCycle when contraction
    would close a cycle, CheckFailed otherwise) and the order must be a
    legal schedule of the induced sub-graph. The legality checks themselves
    are the caller's responsibility; footprint accounting stays exact for
    any isolated set.
    """
    fused = as_fused(g)
    cur = fused.graph
    mset = frozenset(members)
    if len(mset) < 2:
        raise CheckFailed("fusion needs at least two operators")
    iso = is_isolated_subgraph(cur, mset)
    if not iso:
        if _contraction_creates_cycle(cur, mset):
            raise WouldCreateCycle(
                f"contracting a non-isolated set would create a cycle "
                f"({iso.reason})")
        raise CheckFailed(f"set is not an isolated sub-graph ({iso.reason})")

    order = tuple(internal_order)
    if sorted(order) != sorted(mset):
        raise CheckFailed("internal order is not a permutation of the members")
    sub, op_map, _ = subgraph_as_graph(cur, mset)
    local = tuple(op_map[v] for v in order)
    validate_schedule(sub, local)
    trace = evaluate(sub, local)
    mem_g = trace.peak

    in_tensor = cur.tensors[iso.input_tensors[0]]
    out_tensor = cur.tensors[iso.output_tensors[0]]
    hyper_name = f"hyper_{len(fused.history)}"
    cycle = 1 + max((fused.records[m].cycle for m in mset
                     if m in fused.records), default=0)
    record = FusionRecord(
        hypernode=hyper_name,
        members=tuple(cur.operators[v].name for v in order),
        original_ops=tuple(i for v in order for i in fused.op_origin[v]),
        internal_peak=mem_g,
        input_size=in_tensor.size,
        output_size=out_tensor.size,
        transient_profile=trace.transient,
        cycle=cycle,
    )

    # rebuild the contracted graph with dense ids; the hypernode takes the
    # slot of its smallest member
    survivors = [v for v in range(cur.num_ops) if v not in mset]
    slots = sorted(survivors + [min(mset)])
    new_id = {}
    hyper_id = None
    for pos, v in enumerate(slots):
        if v in mset:
            hyper_id = pos
        else:
            new_id[v] = pos

    internal_tensors = {cur.operators[v].output for v in mset
                        if cur.operators[v].output != out_tensor.id}
    kept = [t for t in cur.tensors if t.id not in internal_tensors]
    tensor_id = {t.id: i for i, t in enumerate(kept)}

    def map_consumers(t: TensorSpec):
        out = []
        for c in t.consumers:
            nc = hyper_id if c in mset else new_id[c]
            if nc not in out:
                out.append(nc)
        return tuple(out)

    tensors = []
    for t in kept:
        producer = t.producer
        if producer != GRAPH_INPUT:
            producer = hyper_id if producer in mset else new_id[producer]
        tensors.append(TensorSpec(
            id=tensor_id[t.id], name=t.name, size=t.size,
            producer=producer, consumers=map_consumers(t)))

    operators = []
    for v in slots:
        if v in mset:
            operators.append(OperatorSpec(
                id=hyper_id, name=hyper_name,
                inputs=(tensor_id[in_tensor.id],),
                output=tensor_id[out_tensor.id],
                extra_size=mem_g - in_tensor.size - out_tensor.size))
        else:
            o = cur.operators[v]
            operators.append(OperatorSpec(
                id=new_id[v], name=o.name,
                inputs=tuple(tensor_id[t] for t in o.inputs),
                output=tensor_id[o.output], extra_size=o.extra_size))

    new_graph = ComputationGraph(
        operators, tensors,
        [tensor_id[t] for t in cur.input_tensors], cur.unit)

    op_origin = [None] * new_graph.num_ops
    records = {}
    for v in survivors:
        op_origin[new_id[v]] = fused.op_origin[v]
        if v in fused.records:
            records[new_id[v]] = fused.records[v]
    op_origin[hyper_id] = record.original_ops
    records[hyper_id] = record

    return FusedGraph(fused.origin, new_graph, op_origin, records,
                      fused.history + (record,))


def _contraction_creates_cycle(g: ComputationGraph, mset: frozenset[int]) -> bool:
    r = reachability(g)
    umask = 0
    for v in mset:
        umask |= 1 << v
    for e in range(g.num_ops):
        if (umask >> e) & 1:
            continue
        if r.anc[e] & umask and r.des[e] & umask:
            return True
    return False


def iterative_fusion(g, max_subgraph_size: int = 20,
                     cfg: SolverConfig | None = None) -> FusedGraph:
    """Fuse to a fixed point, growing candidates from each tensor's consumers.

    Candidates grow breadth-first over operators whose inputs are all
    available inside the candidate; the first candidate passing a legality
    check is fused and enumeration restarts on the contracted graph. Stops
    when a full pass fuses nothing.
    """
    if max_subgraph_size < 2:
        raise ValueError("max_subgraph_size must be at least 2")
    fused = as_fused(g)
    changed = True
    while changed:
        changed = False
        for x in range(fused.graph.num_tensors):
            found = _grow_candidate(fused, x, max_subgraph_size, cfg)
            if found is not None:
                members, check = found
                fused = fuse(fused, members, check.internal_order)
                changed = True
                break
    return fused


def _grow_candidate(fused: FusedGraph, x: int, max_size: int,
                    cfg: SolverConfig | None):
    g = fused.graph
    seed = g.tensors[x].consumers
    if not seed:
        return None
    available = {x}
    members: list[int] = []
    mset: set[int] = set()
    enqueued: set[int] = set()
    queue: deque[int] = deque()

    def ready(op: int) -> bool:
        return all(t in available for t in g.operators[op].inputs)

    for c in sorted(seed):
        if ready(c):
            queue.append(c)
            enqueued.add(c)
    while queue:
        op = queue.popleft()
        members.append(op)
        mset.add(op)
        if len(members) > max_size:
            return None
        available.add(g.operators[op].output)
        if len(members) >= 2:
            check = _check_candidate(fused, mset, cfg)
            if check:
                return list(members), check
        fresh = [c for c in g.tensors[g.operators[op].output].consumers
                 if c not in mset and c not in enqueued and ready(c)]
        for c in sorted(fresh):
            queue.append(c)
            enqueued.add(c)
    return None


def _check_candidate(fused: FusedGraph, mset, cfg) -> FusionCheck:
    g = fused.graph
    iso = is_isolated_subgraph(g, mset)
    if not iso:
        return FusionCheck(False, reason=f"not-isolated ({iso.reason})")
    chain = _chain_order(g, mset)
    if chain is not None:
        try:
            check = check_monotonic_linear(fused, chain)
        except NotLinear:
            check = FusionCheck(False, reason="not-linear")
        if check:
            return check
    return check_general_fusable(fused, mset, cfg)


def _chain_order(g: ComputationGraph, mset) -> tuple[int, ...] | None:
    """Linearize ``mset`` as a chain, or None if it is not one."""
    incoming = {v for v in mset
                if any(g.tensors[t].producer in mset
                       for t in g.operators[v].inputs)}
    heads = sorted(mset - incoming)
    if len(heads) != 1:
        return None
    order = [heads[0]]
    while len(order) < len(mset):
        t = g.tensors[g.operators[order[-1]].output]
        if len(t.consumers) != 1 or t.consumers[0] not in mset:
            return None
        nxt = t.consumers[0]
        if nxt in order:
            return None
        order.append(nxt)
    # the tail's output must not feed back into the set
    t = g.tensors[g.operators[order[-1]].output]
    if any(c in mset for c in t.consumers):
        return None
    return tuple(order)
