"""Deterministic discrete-event simulator for serverless CPU scheduling.

Simulates FaaS-style task streams on a fixed set of cores under FIFO, CFS,
round-robin, EDF, and a hybrid FIFO+CFS policy with an adaptive preemption
time limit and utilization-driven core-group rightsizing, then prices every
invocation with a per-millisecond billing model.
"""

from .adaptation import (
    DurationWindow,
    RightsizeConfig,
    UtilizationSample,
    rightsize_decision,
    sample_utilization,
    update_limit,
)
from .core import (
    EmptySamplesError,
    IncompleteTaskError,
    MetricsRecord,
    SimTime,
    SimulatorError,
    Task,
    ms,
    percentile,
    seconds,
    task_metrics,
)
from .cost import CostModel, CostModelError, default_cost_model, invocation_cost
from .engine import Core, Simulation, SimulationResult
from .hybrid import HybridScheduler
from .policies import (
    CfsScheduler,
    EdfScheduler,
    FifoPreemptScheduler,
    FifoScheduler,
    PolicyConfig,
    RoundRobinScheduler,
    Scheduler,
    make_scheduler,
)
from .report import RunReport, aggregate, compare, config_hash, export
from .workload import (
    WorkloadEntry,
    WorkloadError,
    WorkloadSpec,
    derive_iat,
    ingest_trace,
    read_workload,
    synthesize,
    tasks_from_workload,
    workload_hash,
    workload_stats,
    write_workload,
)

__version__ = "0.1.0"

__all__ = [
    "CfsScheduler",
    "Core",
    "CostModel",
    "CostModelError",
    "DurationWindow",
    "EdfScheduler",
    "EmptySamplesError",
    "FifoPreemptScheduler",
    "FifoScheduler",
    "HybridScheduler",
    "IncompleteTaskError",
    "MetricsRecord",
    "PolicyConfig",
    "RightsizeConfig",
    "RoundRobinScheduler",
    "RunReport",
    "Scheduler",
    "SimTime",
    "Simulation",
    "SimulationResult",
    "SimulatorError",
    "Task",
    "UtilizationSample",
    "WorkloadEntry",
    "WorkloadError",
    "WorkloadSpec",
    "aggregate",
    "compare",
    "config_hash",
    "default_cost_model",
    "derive_iat",
    "export",
    "ingest_trace",
    "invocation_cost",
    "make_scheduler",
    "ms",
    "percentile",
    "read_workload",
    "rightsize_decision",
    "sample_utilization",
    "seconds",
    "synthesize",
    "task_metrics",
    "tasks_from_workload",
    "update_limit",
    "workload_hash",
    "workload_stats",
    "write_workload",
]
