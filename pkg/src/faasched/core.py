"""Base vocabulary shared by the simulator: time, tasks, per-task metrics.

All simulated time is integer microseconds.  Integer arithmetic keeps runs
bit-reproducible; there is no float anywhere on the simulation path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction

# SimTime values are plain ints counting microseconds since simulation start.
SimTime = int

US_PER_MS = 1_000
US_PER_S = 1_000_000


def ms(x: float) -> SimTime:
    """Milliseconds to SimTime. Accepts floats for readable test literals."""
    return round(x * US_PER_MS)


def seconds(x: float) -> SimTime:
    return round(x * US_PER_S)


class SimulatorError(Exception):
    """Base class for every error this package raises on purpose."""


class IncompleteTaskError(SimulatorError):
    """Metrics were requested for a task that never started or never finished."""


class EmptySamplesError(SimulatorError):
    """A percentile of zero samples does not exist."""


@dataclass(slots=True)
class Task:
    """One function invocation.

    `remaining` counts down from `demand` as the task receives service;
    `completion` is set exactly when it reaches zero.  `vruntime` only
    advances while the task is scheduled by a CFS-type policy and never
    decreases over the task's lifetime.  `group_tag` names the core group
    currently responsible for the task ("fifo", "cfs", or a policy name).
    """

    id: int
    arrival: SimTime
    demand: SimTime
    memory_mb: int
    remaining: SimTime = field(default=-1)
    first_run: SimTime | None = None
    completion: SimTime | None = None
    preemptions: int = 0
    vruntime: SimTime = 0
    group_tag: str = ""
    deadline: SimTime | None = None

    def __post_init__(self) -> None:
        if self.demand <= 0:
            raise SimulatorError(f"task {self.id}: demand must be positive, got {self.demand}")
        if self.remaining < 0:
            self.remaining = self.demand

    @property
    def done(self) -> bool:
        return self.completion is not None


@dataclass(frozen=True, slots=True)
class MetricsRecord:
    """Derived per-task timings, plus the billed cost once a model is applied.

    turnaround == execution + response holds by construction:
        execution  = completion - first_run
        response   = first_run - arrival
        turnaround = completion - arrival
    """

    task_id: int
    execution: SimTime
    response: SimTime
    turnaround: SimTime
    cost_usd: Decimal | None = None


def task_metrics(task: Task) -> MetricsRecord:
    """Compute the three timing metrics for a completed task."""
    if task.first_run is None or task.completion is None:
        raise IncompleteTaskError(f"task {task.id} has not completed")
    return MetricsRecord(
        task_id=task.id,
        execution=task.completion - task.first_run,
        response=task.first_run - task.arrival,
        turnaround=task.completion - task.arrival,
    )


def percentile(samples: list[SimTime], p: float) -> SimTime:
    """Nearest-rank percentile: sort ascending, take element ceil(p/100*n)-1.

    Returns an element of `samples`, never an interpolated value.  p must lie
    in (0, 100].
    """
    if not samples:
        raise EmptySamplesError("percentile of empty sample set")
    if not 0 < p <= 100:
        raise SimulatorError(f"percentile p must be in (0, 100], got {p}")
    ordered = sorted(samples)
    # Fraction(str(p)) reads p as the decimal literal the caller wrote, so
    # rank is exact; float multiplication would put 99.9 * 1000 / 100 a hair
    # above 999 and shift the rank.
    rank = math.ceil(Fraction(str(p)) * len(ordered) / 100)
    return ordered[rank - 1]
