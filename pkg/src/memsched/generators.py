"""Synthetic benchmark graph families.

Families mirror the usual suspects: plain chains, chains of residual
blocks, parallel branch networks, NASNet-like cells with branchy interiors
and linear cell-to-cell wiring, HRNet-like parallel residual branches, and
seeded random DAGs. Generators are pure functions of their spec: the same
family, parameters, and seed always produce the same graph.

Tensor sizes are abstract units. The profiles are chosen so the structures
behave like their namesakes under fusion: residual blocks and whole cells
satisfy the boundary-dominance conditions and contract, and chains of
contracted blocks are monotone.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import InvalidSpec
from .graph import ComputationGraph, load_graph

FAMILIES = ("linear", "residual-chain", "parallel-branches",
            "nasnet-cell-like", "hrnet-block-like", "random-dag")


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    params: dict = field(default_factory=dict)

    def label(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.family}{{{inner}}}"


def generate(spec: GeneratorSpec | str, **params) -> ComputationGraph:
    """Build the graph described by a GeneratorSpec (or family + params)."""
    if isinstance(spec, GeneratorSpec):
        family, params = spec.family, dict(spec.params)
    else:
        family = spec
    builder = _BUILDERS.get(family)
    if builder is None:
        raise InvalidSpec(f"unknown family {family!r}; expected one of {FAMILIES}")
    try:
        return builder(**params)
    except TypeError as exc:
        raise InvalidSpec(f"bad parameters for {family!r}: {exc}") from exc


class _Doc:
    """Tiny builder for graph documents."""

    def __init__(self, unit="units"):
        self.doc = {"unit": unit, "inputs": [], "operators": []}

    def input(self, name, size):
        self.doc["inputs"].append({"id": name, "size": size})
        return name

    def op(self, name, inputs, out_name, out_size, extra=0):
        self.doc["operators"].append({
            "id": name, "name": name, "inputs": list(inputs),
            "output": {"id": out_name, "size": out_size},
            "extra_size": extra})
        return out_name

    def build(self) -> ComputationGraph:
        return load_graph(self.doc)


def _linear(depth: int = 8, seed: int = 0, min_size: int = 1,
            max_size: int = 16) -> ComputationGraph:
    if depth < 1:
        raise InvalidSpec("linear: depth must be >= 1")
    rng = random.Random(seed)
    d = _Doc()
    prev = d.input("in0", rng.randint(min_size, max_size))
    for i in range(depth):
        prev = d.op(f"op{i}", [prev], f"t{i}", rng.randint(min_size, max_size))
    return d.build()


def _residual_block(d: _Doc, tag: str, entry: str, size: int) -> str:
    a = d.op(f"{tag}_conv1", [entry], f"{tag}_t1", size)
    b = d.op(f"{tag}_conv2", [a], f"{tag}_t2", size)
    return d.op(f"{tag}_add", [entry, b], f"{tag}_out", size)


def _residual_chain(blocks: int = 3, size: int = 4) -> ComputationGraph:
    if blocks < 1:
        raise InvalidSpec("residual-chain: blocks must be >= 1")
    d = _Doc()
    prev = d.input("in0", size)
    for i in range(blocks):
        prev = _residual_block(d, f"b{i}", prev, size)
    return d.build()


def _parallel_branches(branches: int = 2, depth: int = 2,
                       size: int = 4) -> ComputationGraph:
    if branches < 1 or depth < 1:
        raise InvalidSpec("parallel-branches: branches and depth must be >= 1")
    d = _Doc()
    src = d.input("in0", size)
    stem = d.op("source", [src], "stem", size)
    outs = []
    for b in range(branches):
        prev = stem
        for i in range(depth):
            prev = d.op(f"br{b}_op{i}", [prev], f"br{b}_t{i}", size)
        outs.append(prev)
    d.op("sink", outs, "out", size)
    return d.build()


def _nasnet_cell_like(cells: int = 3, units: int = 4, size: int = 4,
                      seed: int = 0) -> ComputationGraph:
    """Linearly chained cells, each a bundle of parallel 2-op branches.

    Unit tensors are at least as large as the cell boundary, so a whole
    cell satisfies boundary dominance and contracts to one hypernode.
    """
    if cells < 1 or units < 1:
        raise InvalidSpec("nasnet-cell-like: cells and units must be >= 1")
    rng = random.Random(seed)
    d = _Doc()
    prev = d.input("in0", size)
    for c in range(cells):
        qs = []
        for u in range(units):
            p = d.op(f"c{c}u{u}_a", [prev], f"c{c}u{u}_p",
                     rng.randint(size, 2 * size))
            qs.append(d.op(f"c{c}u{u}_b", [p], f"c{c}u{u}_q",
                           rng.randint(size, 2 * size)))
        prev = d.op(f"c{c}_join", qs, f"c{c}_out", size)
    return d.build()


def _hrnet_block_like(branches: int = 3, blocks: int = 3, size: int = 4,
                      cross_fuse: bool = False) -> ComputationGraph:
    """Parallel residual-block branches, one resolution stream each.

    With ``cross_fuse`` an exchange stage is appended: one fusion operator
    per branch consuming every branch output.
    """
    if branches < 1 or blocks < 1:
        raise InvalidSpec("hrnet-block-like: branches and blocks must be >= 1")
    d = _Doc()
    outs = []
    for b in range(branches):
        prev = d.input(f"in{b}", size)
        for i in range(blocks):
            prev = _residual_block(d, f"br{b}b{i}", prev, size)
        outs.append(prev)
    if cross_fuse:
        for b in range(branches):
            d.op(f"xfuse{b}", outs, f"xout{b}", size)
    return d.build()


def _random_dag(n: int = 10, seed: int = 0, max_fanin: int = 3,
                locality: int = 4, min_size: int = 1,
                max_size: int = 16) -> ComputationGraph:
    """Connected random DAG with bounded fan-in and local edges."""
    if n < 1:
        raise InvalidSpec("random-dag: n must be >= 1")
    rng = random.Random(seed)
    d = _Doc()
    graph_in = d.input("in0", rng.randint(min_size, max_size))
    outs = []
    for i in range(n):
        if i == 0:
            inputs = [graph_in]
        else:
            window = outs[max(0, i - locality):i]
            fanin = rng.randint(1, min(max_fanin, len(window)))
            inputs = rng.sample(window, fanin)
            if rng.random() < 0.15:
                inputs.append(graph_in)
        extra = rng.randint(1, 4) if rng.random() < 0.2 else 0
        outs.append(d.op(f"op{i}", inputs, f"t{i}",
                         rng.randint(min_size, max_size), extra))
    return d.build()


_BUILDERS = {
    "linear": _linear,
    "residual-chain": _residual_chain,
    "parallel-branches": _parallel_branches,
    "nasnet-cell-like": _nasnet_cell_like,
    "hrnet-block-like": _hrnet_block_like,
    "random-dag": _random_dag,
}
