"""Exception types shared across the package."""


class MemschedError(Exception):
    """Base class for all errors raised by this package."""


class GraphValidationError(MemschedError):
    """A graph document or in-memory graph violates a structural invariant."""


class CycleDetected(GraphValidationError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("operator cycle: " + " -> ".join(str(c) for c in self.cycle))


class DanglingReference(GraphValidationError):
    def __init__(self, missing_id, context=""):
        self.missing_id = missing_id
        msg = f"unknown id {missing_id!r}"
        if context:
            msg += f" ({context})"
        super().__init__(msg)


class MultiOutputOperator(GraphValidationError):
    def __init__(self, op_id):
        self.op_id = op_id
        super().__init__(f"operator {op_id!r} declares more than one output tensor")


class NegativeSize(GraphValidationError):
    def __init__(self, tensor_id, size):
        self.tensor_id = tensor_id
        self.size = size
        super().__init__(f"tensor {tensor_id!r} has negative size {size}")


class UnknownVertex(MemschedError):
    def __init__(self, vertex):
        self.vertex = vertex
        super().__init__(f"vertex {vertex!r} is not an operator of this graph")


class IllegalSchedule(MemschedError):
    """A schedule violates a producer-before-consumer precedence."""

    def __init__(self, message):
        super().__init__(message)


class NegativeFootprint(MemschedError):
    """A fusion record yields a negative stable footprint (inconsistent record)."""


class NotLinear(MemschedError):
    """A sequence of operators handed to the chain check is not a linear chain."""


class WouldCreateCycle(MemschedError):
    """Contracting the requested vertex set would create a directed cycle."""


class CheckFailed(MemschedError):
    """Fusion was requested for a set that fails the legality check."""


class TooLarge(MemschedError):
    """Graph exceeds the size limit of the brute-force enumerator."""


class InconsistentAssignment(MemschedError):
    """An ILP assignment does not decode to a legal schedule or violates a constraint."""


class InfeasibleBalance(MemschedError):
    """No acyclic partition satisfies the requested balance tolerance."""


class InvalidSpec(MemschedError):
    """A generator spec has an unknown family or bad parameters."""
