"""Computation-graph data model, reachability, and sub-graph queries.

Operators form a DAG connected by tensors. A tensor is a hyperedge: it has
exactly one producer (an operator, or the graph itself for inputs) and any
number of consumers. Every operator produces exactly one output tensor.

After loading, operators and tensors are renumbered densely (0..n-1) in
document order; original string ids are kept for user-facing reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import (
    CycleDetected,
    DanglingReference,
    GraphValidationError,
    MultiOutputOperator,
    NegativeSize,
    UnknownVertex,
)

GRAPH_INPUT = -1


@dataclass(frozen=True)
class TensorSpec:
    """A tensor: one producer, zero or more consumers.

    A tensor with no consumers is a graph output and stays resident through
    the final step. ``producer`` is an operator index or ``GRAPH_INPUT``.
    """

    id: int
    name: str
    size: int
    producer: int
    consumers: tuple[int, ...]


@dataclass(frozen=True)
class OperatorSpec:
    """An operator: consumes ``inputs`` tensors, produces tensor ``output``.

    ``extra_size`` is transient workspace beyond inputs and outputs. It is
    also how fused hypernodes carry their internal peak (see fusion module).
    """

    id: int
    name: str
    inputs: tuple[int, ...]
    output: int
    extra_size: int


class ComputationGraph:
    """Immutable operator DAG with hyperedge tensors.

    Construction validates every structural invariant (acyclicity, dangling
    references, sizes). Instances are safe for concurrent reads.
    """

    def __init__(self, operators: Sequence[OperatorSpec], tensors: Sequence[TensorSpec],
                 input_tensors: Sequence[int], unit: str = "units"):
        self.operators: tuple[OperatorSpec, ...] = tuple(operators)
        self.tensors: tuple[TensorSpec, ...] = tuple(tensors)
        self.input_tensors: tuple[int, ...] = tuple(input_tensors)
        self.unit = unit
        self._validate()
        # successor/predecessor operator adjacency derived from tensors
        succ = [set() for _ in self.operators]
        pred = [set() for _ in self.operators]
        for t in self.tensors:
            if t.producer == GRAPH_INPUT:
                continue
            for c in t.consumers:
                succ[t.producer].add(c)
                pred[c].add(t.producer)
        self._succ = tuple(tuple(sorted(s)) for s in succ)
        self._pred = tuple(tuple(sorted(p)) for p in pred)

    # -- basic accessors -------------------------------------------------

    @property
    def num_ops(self) -> int:
        return len(self.operators)

    @property
    def num_tensors(self) -> int:
        return len(self.tensors)

    def op(self, i: int) -> OperatorSpec:
        return self.operators[i]

    def tensor(self, i: int) -> TensorSpec:
        return self.tensors[i]

    def successors(self, i: int) -> tuple[int, ...]:
        return self._succ[i]

    def predecessors(self, i: int) -> tuple[int, ...]:
        return self._pred[i]

    def output_tensors(self) -> tuple[int, ...]:
        """Tensors with no consumers; they remain live through the last step."""
        return tuple(t.id for t in self.tensors if not t.consumers)

    def op_names(self) -> list[str]:
        return [o.name for o in self.operators]

    # -- validation ------------------------------------------------------

    def _validate(self) -> None:
        n = self.num_ops
        if n == 0:
            raise GraphValidationError("graph has no operators")
        for i, o in enumerate(self.operators):
            if o.id != i:
                raise GraphValidationError(f"operator ids are not dense at {o.id}")
        for j, t in enumerate(self.tensors):
            if t.id != j:
                raise GraphValidationError(f"tensor ids are not dense at {t.id}")
            if t.size < 0:
                raise NegativeSize(t.name, t.size)
            if t.producer != GRAPH_INPUT and not (0 <= t.producer < n):
                raise DanglingReference(t.producer, f"producer of tensor {t.name!r}")
            for c in t.consumers:
                if not (0 <= c < n):
                    raise DanglingReference(c, f"consumer of tensor {t.name!r}")
            if t.producer == GRAPH_INPUT and t.id not in self.input_tensors:
                raise GraphValidationError(
                    f"tensor {t.name!r} has no producer but is not a graph input")
        produced = {}
        for o in self.operators:
            if o.output in produced:
                raise GraphValidationError(
                    f"tensor {self.tensors[o.output].name!r} has two producers")
            produced[o.output] = o.id
            if self.tensors[o.output].producer != o.id:
                raise GraphValidationError(
                    f"operator {o.name!r} and tensor {self.tensors[o.output].name!r} "
                    "disagree about production")
            for t in o.inputs:
                if not (0 <= t < self.num_tensors):
                    raise DanglingReference(t, f"input of operator {o.name!r}")
        for t in self.input_tensors:
            if self.tensors[t].producer != GRAPH_INPUT:
                raise GraphValidationError(
                    f"input tensor {self.tensors[t].name!r} has an operator producer")
            if not self.tensors[t].consumers:
                raise GraphValidationError(
                    f"graph input {self.tensors[t].name!r} is never consumed")
        self._check_acyclic()

    def _check_acyclic(self) -> None:
        n = self.num_ops
        state = [0] * n  # 0 unvisited, 1 on stack, 2 done
        succ = [sorted(set(self.tensors[o.output].consumers)) for o in self.operators]
        for root in range(n):
            if state[root]:
                continue
            stack = [(root, iter(succ[root]))]
            state[root] = 1
            path = [root]
            while stack:
                node, it = stack[-1]
                advanced = False
                for nxt in it:
                    if state[nxt] == 1:
                        k = path.index(nxt)
                        names = [self.operators[p].name for p in path[k:]] + \
                                [self.operators[nxt].name]
                        raise CycleDetected(names)
                    if state[nxt] == 0:
                        state[nxt] = 1
                        path.append(nxt)
                        stack.append((nxt, iter(succ[nxt])))
                        advanced = True
                        break
                if not advanced:
                    state[node] = 2
                    path.pop()
                    stack.pop()


@dataclass(frozen=True)
class ReachabilitySets:
    """Per-operator ancestor/descendant/parallel sets as bitmasks over V."""

    anc: tuple[int, ...]
    des: tuple[int, ...]
    para: tuple[int, ...]

    def anc_count(self, u: int) -> int:
        return self.anc[u].bit_count()

    def des_count(self, u: int) -> int:
        return self.des[u].bit_count()

    def is_ancestor(self, u: int, v: int) -> bool:
        """True iff u is an ancestor of v."""
        return bool(self.anc[v] >> u & 1)


@dataclass(frozen=True)
class SubgraphRef:
    """A vertex subset with its induced edge set.

    Edges are (producer op, consumer op, tensor) triples whose endpoints both
    lie in the subset.
    """

    vertices: frozenset[int]
    edges: tuple[tuple[int, int, int], ...]


@dataclass(frozen=True)
class IsolationCheck:
    """Result of the isolated-sub-graph test, with diagnostics."""

    ok: bool
    reason: str
    input_tensors: tuple[int, ...]
    output_tensors: tuple[int, ...]

    def __bool__(self) -> bool:
        return self.ok


def load_graph(document) -> ComputationGraph:
    """Build a validated, densely renumbered graph from a JSON document.

    ``document`` may be a dict, a JSON string, or a path-like / file object.
    Schema::

        {"unit": "KB",
         "inputs": [{"id": "x", "size": 8}, ...],
         "operators": [{"id": "a", "name": "conv", "inputs": ["x"],
                        "output": {"id": "A", "size": 4}, "extra_size": 0}, ...]}
    """
    doc = _as_dict(document)
    unit = doc.get("unit", "units")
    ops_doc = doc.get("operators", [])
    inputs_doc = doc.get("inputs", [])
    if not ops_doc:
        raise GraphValidationError("document has no operators")

    tensor_ids: dict[str, int] = {}
    tensors: list[dict] = []

    def intern_tensor(name, size, producer):
        if name in tensor_ids:
            raise GraphValidationError(f"tensor {name!r} declared twice")
        tid = len(tensors)
        tensor_ids[name] = tid
        tensors.append({"name": name, "size": size, "producer": producer,
                        "consumers": []})
        return tid

    for entry in inputs_doc:
        size = int(entry["size"])
        if size < 0:
            raise NegativeSize(entry["id"], size)
        intern_tensor(str(entry["id"]), size, GRAPH_INPUT)
    input_ids = list(range(len(tensors)))

    op_ids: dict[str, int] = {}
    for idx, entry in enumerate(ops_doc):
        name = str(entry["id"])
        if name in op_ids:
            raise GraphValidationError(f"operator {name!r} declared twice")
        op_ids[name] = idx
        out = entry["output"]
        if isinstance(out, list):
            if len(out) != 1:
                raise MultiOutputOperator(name)
            out = out[0]
        size = int(out["size"])
        if size < 0:
            raise NegativeSize(out["id"], size)
        intern_tensor(str(out["id"]), size, idx)

    operators = []
    for idx, entry in enumerate(ops_doc):
        name = str(entry["id"])
        seen = []
        for ref in entry.get("inputs", []):
            ref = str(ref)
            if ref not in tensor_ids:
                raise DanglingReference(ref, f"input of operator {name!r}")
            tid = tensor_ids[ref]
            if tid not in seen:  # inputs are an ordered set
                seen.append(tid)
                tensors[tid]["consumers"].append(idx)
        out = entry["output"]
        if isinstance(out, list):
            out = out[0]
        operators.append(OperatorSpec(
            id=idx,
            name=name,
            inputs=tuple(seen),
            output=tensor_ids[str(out["id"])],
            extra_size=int(entry.get("extra_size", 0)),
        ))

    tensor_specs = [TensorSpec(id=i, name=t["name"], size=t["size"],
                               producer=t["producer"],
                               consumers=tuple(t["consumers"]))
                    for i, t in enumerate(tensors)]
    return ComputationGraph(operators, tensor_specs, input_ids, unit)


def dump_graph(g: ComputationGraph) -> dict:
    """Inverse of load_graph: emit the JSON document form of a graph."""
    return {
        "unit": g.unit,
        "inputs": [{"id": g.tensors[t].name, "size": g.tensors[t].size}
                   for t in g.input_tensors],
        "operators": [
            {"id": o.name, "name": o.name,
             "inputs": [g.tensors[t].name for t in o.inputs],
             "output": {"id": g.tensors[o.output].name,
                        "size": g.tensors[o.output].size},
             "extra_size": o.extra_size}
            for o in g.operators
        ],
    }


def reachability(g: ComputationGraph) -> ReachabilitySets:
    """Transitively closed ancestor/descendant/parallel sets for every operator."""
    n = g.num_ops
    order = _topological_order(g)
    anc = [0] * n
    for u in order:
        for v in g.successors(u):
            anc[v] |= anc[u] | (1 << u)
    des = [0] * n
    for u in reversed(order):
        for v in g.successors(u):
            des[u] |= des[v] | (1 << v)
    full = (1 << n) - 1
    para = [full & ~(anc[u] | des[u] | (1 << u)) for u in range(n)]
    return ReachabilitySets(tuple(anc), tuple(des), tuple(para))


def induced_subgraph(g: ComputationGraph, s: Iterable[int]) -> SubgraphRef:
    """Edges of g with both endpoints in ``s``."""
    sset = frozenset(s)
    for v in sset:
        if not (0 <= v < g.num_ops):
            raise UnknownVertex(v)
    edges = []
    for t in g.tensors:
        if t.producer == GRAPH_INPUT or t.producer not in sset:
            continue
        for c in t.consumers:
            if c in sset:
                edges.append((t.producer, c, t.id))
    return SubgraphRef(sset, tuple(sorted(edges)))


def boundary_tensors(g: ComputationGraph, s: frozenset[int]) -> tuple[list[int], list[int]]:
    """Tensors crossing into and out of vertex set ``s``.

    A tensor crosses in when some member consumes it but its producer is
    outside (or it is a graph input). It crosses out when a member produces
    it and it has a consumer outside or no consumer at all (graph output).
    """
    inputs = []
    outputs = []
    for t in g.tensors:
        produced_inside = t.producer != GRAPH_INPUT and t.producer in s
        consumed_inside = any(c in s for c in t.consumers)
        if consumed_inside and not produced_inside:
            inputs.append(t.id)
        if produced_inside and (any(c not in s for c in t.consumers) or not t.consumers):
            outputs.append(t.id)
    return inputs, outputs


def is_isolated_subgraph(g: ComputationGraph, s: Iterable[int]) -> IsolationCheck:
    """Test the three isolation conditions for vertex set ``s``.

    Isolated means: exactly one tensor crosses in, exactly one crosses out,
    and every consumer of the crossing-in tensor lies inside ``s``.
    """
    sset = frozenset(s)
    if not sset:
        return IsolationCheck(False, "empty-set", (), ())
    for v in sset:
        if not (0 <= v < g.num_ops):
            raise UnknownVertex(v)
    ins, outs = boundary_tensors(g, sset)
    if len(ins) != 1:
        return IsolationCheck(False, f"not-one-input ({len(ins)})",
                              tuple(ins), tuple(outs))
    if len(outs) != 1:
        return IsolationCheck(False, f"not-one-output ({len(outs)})",
                              tuple(ins), tuple(outs))
    if any(c not in sset for c in g.tensors[ins[0]].consumers):
        return IsolationCheck(False, "input-consumer-outside",
                              tuple(ins), tuple(outs))
    return IsolationCheck(True, "", tuple(ins), tuple(outs))


def subgraph_as_graph(g: ComputationGraph, members: Sequence[int]) -> tuple[ComputationGraph, dict[int, int], dict[int, int]]:
    """Materialize the induced sub-graph of ``members`` as a standalone graph.

    Crossing-in tensors become graph inputs of the sub-graph; crossing-out
    tensors keep their size and lose outside consumers. Returns the graph
    plus {member op -> local op} and {tensor -> local tensor} maps.
    """
    mset = frozenset(members)
    ins, _ = boundary_tensors(g, mset)
    order = sorted(mset)
    op_map = {v: i for i, v in enumerate(order)}

    tensor_map: dict[int, int] = {}
    tensors: list[TensorSpec] = []

    def add_tensor(tid: int, producer: int) -> int:
        t = g.tensors[tid]
        local = len(tensors)
        tensor_map[tid] = local
        tensors.append(TensorSpec(
            id=local, name=t.name, size=t.size, producer=producer,
            consumers=tuple(op_map[c] for c in t.consumers if c in mset)))
        return local

    for tid in sorted(ins):
        add_tensor(tid, GRAPH_INPUT)
    input_ids = list(range(len(tensors)))
    for v in order:
        add_tensor(g.operators[v].output, op_map[v])

    operators = [OperatorSpec(
        id=op_map[v], name=g.operators[v].name,
        inputs=tuple(tensor_map[t] for t in g.operators[v].inputs),
        output=tensor_map[g.operators[v].output],
        extra_size=g.operators[v].extra_size) for v in order]
    sub = ComputationGraph(operators, tensors, input_ids, g.unit)
    return sub, op_map, tensor_map


def _topological_order(g: ComputationGraph) -> list[int]:
    """Kahn order with ascending-id tie-break."""
    import heapq

    indeg = [len(g.predecessors(v)) for v in range(g.num_ops)]
    ready = [v for v in range(g.num_ops) if indeg[v] == 0]
    heapq.heapify(ready)
    out = []
    while ready:
        v = heapq.heappop(ready)
        out.append(v)
        for w in g.successors(v):
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(ready, w)
    if len(out) != g.num_ops:
        raise CycleDetected(["<unreachable>"])
    return out


def _as_dict(document) -> dict:
    if isinstance(document, dict):
        return document
    if isinstance(document, (str, bytes)):
        text = document
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        stripped = text.lstrip()
        if stripped.startswith("{"):
            return json.loads(text)
        with open(text, "r", encoding="utf-8") as fh:
            return json.load(fh)
    if hasattr(document, "read"):
        return json.load(document)
    with open(document, "r", encoding="utf-8") as fh:
        return json.load(fh)
