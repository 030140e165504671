"""Exact FMS machine loading: total processing time vs. machine-load unbalance."""

from .instance import (
    Instance,
    InstanceError,
    OperationDef,
    Part,
    ProcessingOption,
    RandomParams,
    generate_random,
    load_instance,
    load_instance_file,
    paper_example,
    validate,
)
from .model import (
    Assignment,
    Metrics,
    ModelOptions,
    Weights,
    build_model,
    check_feasibility,
    evaluate,
    export_mps,
    movements,
    unbalance,
)
from .schedule import Schedule, TimedOperation, build_schedule, makespan_lower_bound, verify_schedule
from .solver import SolveResult, SolverConfig, lower_bound, solve, solve_exhaustive

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "Instance",
    "InstanceError",
    "Metrics",
    "ModelOptions",
    "OperationDef",
    "Part",
    "ProcessingOption",
    "RandomParams",
    "Schedule",
    "SolveResult",
    "SolverConfig",
    "TimedOperation",
    "Weights",
    "build_model",
    "build_schedule",
    "check_feasibility",
    "evaluate",
    "export_mps",
    "generate_random",
    "load_instance",
    "load_instance_file",
    "lower_bound",
    "makespan_lower_bound",
    "movements",
    "paper_example",
    "solve",
    "solve_exhaustive",
    "unbalance",
    "validate",
    "verify_schedule",
]
