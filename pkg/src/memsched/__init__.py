"""Peak-memory-aware operator scheduling for DNN computation graphs."""

from .errors import (
    CheckFailed,
    CycleDetected,
    DanglingReference,
    GraphValidationError,
    IllegalSchedule,
    InconsistentAssignment,
    InfeasibleBalance,
    InvalidSpec,
    MemschedError,
    MultiOutputOperator,
    NegativeFootprint,
    NegativeSize,
    NotLinear,
    TooLarge,
    UnknownVertex,
    WouldCreateCycle,
)
from .footprint import (
    FootprintTrace,
    Schedule,
    evaluate,
    peak_operator,
    rpo_schedule,
    validate_schedule,
)
from .fusion import (
    FusedGraph,
    FusionCheck,
    FusionRecord,
    check_general_fusable,
    check_monotonic_linear,
    fuse,
    hypernode_stable_footprint,
    iterative_fusion,
)
from .generators import FAMILIES, GeneratorSpec, generate
from .graph import (
    GRAPH_INPUT,
    ComputationGraph,
    IsolationCheck,
    OperatorSpec,
    ReachabilitySets,
    SubgraphRef,
    TensorSpec,
    boundary_tensors,
    dump_graph,
    induced_subgraph,
    is_isolated_subgraph,
    load_graph,
    reachability,
    subgraph_as_graph,
)
from .ilp import Constraint, IlpModel, build_model, export_lp, model_stats
from .partition import (
    PartitionPlan,
    acyclic_partition,
    cut_weight,
    naive_partition,
    partition_is_acyclic,
    partitioned_run,
    partitioned_schedule,
)
from .bench import BenchReport, emit_plot_data, run_bench
from .solver import (
    SolveResult,
    SolverConfig,
    brute_force,
    count_schedules,
    decode_ilp_solution,
    solve,
)

__version__ = "0.1.0"
