"""ILP formulation of the scheduling problem, with topology-aware pruning.

Variables: O_i_j (operator i runs in step j, steps 1..|V|), T_i_j (tensor i
resident in step j, steps 0..|V|), and a continuous non-negative mem.
Constraints encode the step/operator bijection, input availability, tensor
persistence, the initial memory state, and the per-step memory bound; the
objective minimizes mem. Pruning fixes variables to zero from ancestor and
descendant counts, shrinking each operator's feasible step window.

The per-step memory bound folds the executing operator's workspace into one
inequality per step (sum of ES_k * O_k_j); since exactly one O is set per
step this is equivalent to the per-(step, operator) form.

Models are immutable once built and export to CPLEX-style LP text with a
deterministic constraint order for golden-file comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import GRAPH_INPUT, ComputationGraph, reachability

# tag order also fixes the export order
_TAG_ORDER = (
    "bijection-step",
    "bijection-op",
    "input-availability",
    "persistence",
    "initial-empty",
    "memory",
)

_PRUNE_TAGS = ("prune-anc-op", "prune-anc-T", "prune-des-op", "prune-des-T")


@dataclass(frozen=True)
class Constraint:
    tag: str
    name: str
    terms: tuple[tuple[int, str], ...]  # (coefficient, variable)
    sense: str  # "<=" or "="
    rhs: int


class IlpModel:
    """Sparse constraint system over O/T/mem with pruning fixes.

    ``fixed`` maps pruned variables to 0; they are substituted out at export
    time and excluded from the free-variable count.
    """

    def __init__(self, graph: ComputationGraph, constraints: list[Constraint],
                 fixes: list[tuple[str, str]], pruned: bool):
        self.graph = graph
        self.constraints = tuple(constraints)
        self.fixes = tuple(fixes)
        self.fixed = {var: 0 for _, var in fixes}
        self.pruned = pruned

    # -- variable naming -------------------------------------------------

    @staticmethod
    def o_var(i: int, j: int) -> str:
        return f"O_{i}_{j}"

    @staticmethod
    def t_var(i: int, j: int) -> str:
        return f"T_{i}_{j}"

    def variables(self) -> list[str]:
        """All variables before pruning, in deterministic order."""
        n = self.graph.num_ops
        out = [self.o_var(i, j) for i in range(n) for j in range(1, n + 1)]
        out += [self.t_var(t, j) for t in range(self.graph.num_tensors)
                for j in range(n + 1)]
        out.append("mem")
        return out

    def free_variables(self) -> list[str]:
        return [v for v in self.variables() if v not in self.fixed]

    def free_steps_of_op(self, i: int) -> list[int]:
        n = self.graph.num_ops
        return [j for j in range(1, n + 1) if self.o_var(i, j) not in self.fixed]

    # -- assignment checking ----------------------------------------------

    def check_assignment(self, assignment: dict, tol: float = 1e-6) -> list[str]:
        """Names of violated constraints (fixed variables read as 0)."""

        def val(var):
            if var in self.fixed:
                return 0
            return assignment.get(var, 0)

        bad = []
        for c in self.constraints:
            lhs = sum(coef * val(var) for coef, var in c.terms)
            if c.sense == "=" and abs(lhs - c.rhs) > tol:
                bad.append(c.name)
            elif c.sense == "<=" and lhs > c.rhs + tol:
                bad.append(c.name)
        for _, var in self.fixes:
            if assignment.get(var, 0) > tol:
                bad.append(f"fix:{var}")
        return bad

    def assignment_for(self, order) -> dict:
        """Minimal feasible assignment realizing a legal schedule.

        Tensors are resident exactly over their liveness intervals (outputs
        through the final step) and mem equals the schedule's peak.
        """
        from .footprint import evaluate

        g = self.graph
        n = g.num_ops
        order = tuple(order.order) if hasattr(order, "order") else tuple(order)
        step = {v: i + 1 for i, v in enumerate(order)}
        assign = {}
        for i in range(n):
            assign[self.o_var(i, step[i])] = 1
        for t in g.tensors:
            start = 0 if t.producer == GRAPH_INPUT else step[t.producer]
            end = max((step[c] for c in t.consumers), default=n)
            if not t.consumers:
                end = n
            for j in range(start, end + 1):
                assign[self.t_var(t.id, j)] = 1
        assign["mem"] = evaluate(g, order).peak
        return assign


def build_model(g: ComputationGraph, prune: bool = False) -> IlpModel:
    """Construct the full constraint system, optionally with pruning fixes."""
    n = g.num_ops
    o_var, t_var = IlpModel.o_var, IlpModel.t_var
    cons: list[Constraint] = []

    for j in range(1, n + 1):
        cons.append(Constraint(
            "bijection-step", f"bijstep_{j}",
            tuple((1, o_var(i, j)) for i in range(n)), "=", 1))
    for i in range(n):
        cons.append(Constraint(
            "bijection-op", f"bijop_{i}",
            tuple((1, o_var(i, j)) for j in range(1, n + 1)), "=", 1))
    for i, op in enumerate(g.operators):
        for j in range(1, n + 1):
            for k in op.inputs:
                cons.append(Constraint(
                    "input-availability", f"avail_{i}_{j}_{k}",
                    ((1, o_var(i, j)), (-1, t_var(k, j))), "<=", 0))
    for t in g.tensors:
        for j in range(1, n + 1):
            terms = [(1, t_var(t.id, j)), (-1, t_var(t.id, j - 1))]
            if t.producer != GRAPH_INPUT:
                terms.append((-1, o_var(t.producer, j)))
            cons.append(Constraint(
                "persistence", f"persist_{t.id}_{j}", tuple(terms), "<=", 0))
    for t in g.output_tensors():
        # results may not be discarded before the network finishes
        cons.append(Constraint(
            "persistence", f"outlive_{t}",
            ((1, t_var(t, n)),), "=", 1))
    for t in g.tensors:
        rhs = 1 if t.producer == GRAPH_INPUT else 0
        cons.append(Constraint(
            "initial-empty", f"init_{t.id}",
            ((1, t_var(t.id, 0)),), "=", rhs))
    for j in range(1, n + 1):
        terms = [(t.size, t_var(t.id, j)) for t in g.tensors if t.size]
        terms += [(op.extra_size, o_var(i, j))
                  for i, op in enumerate(g.operators) if op.extra_size]
        terms.append((-1, "mem"))
        cons.append(Constraint("memory", f"memcap_{j}", tuple(terms), "<=", 0))

    fixes: list[tuple[str, str]] = []
    if prune:
        reach = reachability(g)
        outputs = set(g.output_tensors())
        for i in range(n):
            na = reach.anc_count(i)
            for j in range(1, na + 1):
                fixes.append(("prune-anc-op", o_var(i, j)))
        for i, op in enumerate(g.operators):
            na = reach.anc_count(i)
            for j in range(1, na + 1):
                fixes.append(("prune-anc-T", t_var(op.output, j)))
        for i in range(n):
            nd = reach.des_count(i)
            for j in range(n - nd + 1, n + 1):
                fixes.append(("prune-des-op", o_var(i, j)))
        for t in g.tensors:
            if not t.consumers or t.id in outputs:
                continue
            # the last consumer can run no later than the loosest consumer
            # window, so the tensor is removable past it
            bound = n - min(reach.des_count(u) for u in t.consumers)
            for j in range(bound + 1, n + 1):
                fixes.append(("prune-des-T", t_var(t.id, j)))

    return IlpModel(g, cons, fixes, prune)


def export_lp(model: IlpModel, destination=None) -> str:
    """Render the model as CPLEX-style LP text (LF endings, ASCII).

    Fixed variables are substituted out. With a ``destination`` (path or
    file object) the text is also written there.
    """
    lines = [f"\\ memsched model: {model.graph.num_ops} ops, "
             f"{model.graph.num_tensors} tensors"
             + (", pruned" if model.pruned else "")]
    lines.append("Minimize")
    lines.append(" obj: mem")
    lines.append("Subject To")
    for c in model.constraints:
        terms = [(coef, var) for coef, var in c.terms if var not in model.fixed]
        lines.append(f" {c.name}: {_render(terms)} {c.sense} {c.rhs}")
    lines.append("Bounds")
    lines.append(" mem >= 0")
    lines.append("Binaries")
    for v in model.free_variables():
        if v != "mem":
            lines.append(f" {v}")
    lines.append("End")
    text = "\n".join(lines) + "\n"
    if destination is not None:
        if hasattr(destination, "write"):
            destination.write(text)
        else:
            with open(destination, "w", encoding="ascii", newline="\n") as fh:
                fh.write(text)
    return text


def _render(terms) -> str:
    if not terms:
        return "0"
    parts = []
    for idx, (coef, var) in enumerate(terms):
        mag = abs(coef)
        body = var if mag == 1 else f"{mag} {var}"
        if idx == 0:
            parts.append(body if coef > 0 else f"- {body}")
        else:
            parts.append(("+ " if coef > 0 else "- ") + body)
    return " ".join(parts)


def model_stats(model: IlpModel) -> dict:
    """Variable and constraint counts, including per-tag breakdowns."""
    n = model.graph.num_ops
    nt = model.graph.num_tensors
    total = n * n + nt * (n + 1) + 1
    by_tag: dict[str, int] = {}
    for c in model.constraints:
        by_tag[c.tag] = by_tag.get(c.tag, 0) + 1
    for tag, _ in model.fixes:
        by_tag[tag] = by_tag.get(tag, 0) + 1
    return {
        "variables_total": total,
        "variables_free": total - len(model.fixed),
        "constraints": len(model.constraints),
        "by_tag": by_tag,
    }
