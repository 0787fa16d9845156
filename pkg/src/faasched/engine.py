"""Discrete-event simulation core.

The engine owns the clock, the event heap, and all time accounting: busy
and overhead accumulators, task remaining-demand updates, vruntime accrual,
completion stamps, utilization sampling, and horizon censoring.  Policies
own queues and decisions; they react to engine callbacks and drive cores
through exactly two primitives:

* ``start_segment`` puts a task on a core for at most ``quantum`` of
  service (or to completion) and schedules the event that ends the segment,
* ``set_idle`` parks a core.

Both bump the core's epoch, which invalidates every event scheduled for the
previous occupancy, so nothing is ever deleted from the heap.

Time is settled lazily: a running segment's service is folded into the
accumulators only when something observes the core (segment end, monitor
tick, migration).  ``settle_core`` is idempotent at a fixed clock value,
which keeps the conservation invariant -- total busy time equals total
demand consumed -- checkable at every monitor tick, not just at the end.
"""

from __future__ import annotations

from dataclasses import dataclass
from heapq import heappop

from .adaptation import UtilizationSample, sample_utilization
from .core import SimTime, SimulatorError, Task
from .events import (
    ARRIVAL,
    COMPLETION,
    LIMIT_EXPIRY,
    MONITOR_TICK,
    SLICE_EXPIRY,
    EventQueue,
)

GROUP_FIFO = "fifo"
GROUP_CFS = "cfs"


@dataclass(slots=True)
class Core:
    id: int
    group: str = ""
    running: Task | None = None
    epoch: int = 0
    run_start: SimTime = 0
    busy_us: SimTime = 0
    overhead_us: SimTime = 0
    slice_preemptions: int = 0
    limit_preemptions: int = 0
    vr_accrues: bool = False
    locked: bool = False

    @property
    def idle(self) -> bool:
        return self.running is None


@dataclass
class SimulationResult:
    tasks: list[Task]
    cores: list[Core]
    samples: list[UtilizationSample]
    clock_end: SimTime
    censored_ids: list[int]
    series: dict[str, list]
    events_processed: int

    @property
    def censored(self) -> bool:
        return bool(self.censored_ids)

    def finished_tasks(self) -> list[Task]:
        return [t for t in self.tasks if t.done]


class Simulation:
    """One run: a task set, a set of cores, and a scheduling policy."""

    def __init__(self, tasks: list[Task], scheduler, n_cores: int, *,
                 monitor_period: SimTime | None = 100_000,
                 horizon: SimTime | None = None,
                 audit: bool = False) -> None:
        if n_cores < 1:
            raise SimulatorError(f"need at least one core, got {n_cores}")
        if monitor_period is not None and monitor_period <= 0:
            raise SimulatorError(f"monitor_period must be positive, got {monitor_period}")
        self.tasks = list(tasks)
        self.cores = [Core(id=i) for i in range(n_cores)]
        self.scheduler = scheduler
        self.monitor_period = monitor_period
        self.horizon = horizon
        self.audit = audit
        self.queue = EventQueue()
        self.clock: SimTime = 0
        self.unfinished = len(self.tasks)
        self.samples: list[UtilizationSample] = []
        self._by_id = {t.id: t for t in self.tasks}
        if len(self._by_id) != len(self.tasks):
            raise SimulatorError("duplicate task ids")
        self._busy_prev: dict[int, SimTime] = {}
        self._events_processed = 0
        scheduler.bind(self)

    # -- primitives exposed to policies -------------------------------

    def start_segment(self, core: Core, task: Task, at: SimTime, *,
                      quantum: SimTime | None = None,
                      end_kind: int = SLICE_EXPIRY,
                      overhead: SimTime = 0,
                      accrue_vr: bool = False) -> None:
        """Run `task` on `core` until completion or for `quantum` service.

        Completion wins ties: the segment-end event is scheduled only when
        the quantum is strictly smaller than the remaining demand.  Overhead
        is charged to the core before service starts, so a 5us context
        switch delays the task by 5us without inflating its busy time.
        """
        if task.remaining <= 0:
            raise SimulatorError(f"dispatching finished task {task.id} at {at}")
        if core.running is not None:
            raise SimulatorError(f"core {core.id} already occupied at {at}")
        core.overhead_us += overhead
        core.running = task
        core.run_start = at + overhead
        core.epoch += 1
        core.vr_accrues = accrue_vr
        if task.first_run is None:
            task.first_run = at
        if quantum is None or not (quantum < task.remaining):
            self.queue.push(core.run_start + task.remaining, COMPLETION,
                            core.id, task.id, core.epoch, self.clock)
        else:
            self.queue.push(core.run_start + quantum, end_kind,
                            core.id, task.id, core.epoch, self.clock)

    def set_idle(self, core: Core) -> None:
        core.running = None
        core.epoch += 1

    def settle_core(self, core: Core, now: SimTime) -> SimTime:
        """Fold service since run_start into the accumulators; returns it."""
        task = core.running
        if task is None:
            return 0
        elapsed = now - core.run_start
        if elapsed <= 0:
            # observed inside the context-switch overhead interval
            return 0
        if elapsed > task.remaining:
            raise SimulatorError(
                f"core {core.id} ran task {task.id} past its demand at {now}"
            )
        task.remaining -= elapsed
        core.busy_us += elapsed
        if core.vr_accrues:
            task.vruntime += elapsed
        core.run_start = now
        return elapsed

    # -- run loop ------------------------------------------------------

    def run(self) -> SimulationResult:
        # id order breaks arrival ties, so equal-time arrivals queue by id
        for task in sorted(self.tasks, key=lambda t: t.id):
            self.queue.push(task.arrival, ARRIVAL, -1, task.id, 0, 0)
        if self.monitor_period is not None:
            self.queue.push(self.monitor_period, MONITOR_TICK, -1, -1, 0, 0)

        heap = self.queue.heap
        cores = self.cores
        sched = self.scheduler
        horizon = self.horizon
        clock = 0
        processed = 0

        while heap:
            at, _seq, kind, core_id, task_id, epoch = heappop(heap)
            if horizon is not None and at > horizon:
                clock = horizon
                break
            clock = at
            self.clock = at
            processed += 1

            if kind == ARRIVAL:
                sched.on_arrival(self._by_id[task_id], at)
                continue

            if kind == MONITOR_TICK:
                self._monitor_tick(at)
                continue

            core = cores[core_id]
            if core.epoch != epoch:
                continue
            task = core.running
            self.settle_core(core, at)
            if kind == COMPLETION:
                if task.remaining != 0:
                    raise SimulatorError(
                        f"completion for task {task.id} with {task.remaining}us left"
                    )
                task.completion = at
                self.unfinished -= 1
                core.running = None
                core.epoch += 1
                sched.on_task_done(task, core, at)
            elif kind == SLICE_EXPIRY:
                sched.on_slice_expiry(core, at)
            else:  # LIMIT_EXPIRY
                sched.on_limit_expiry(core, at)

        self._events_processed = processed
        self.clock = clock
        if self.unfinished and horizon is None:
            raise SimulatorError(
                f"event queue drained with {self.unfinished} tasks unfinished"
            )
        if self.audit:
            self._check_conservation(clock)
        censored = sorted(t.id for t in self.tasks if not t.done)
        return SimulationResult(
            tasks=self.tasks,
            cores=cores,
            samples=self.samples,
            clock_end=clock,
            censored_ids=censored,
            series=sched.extra_series(),
            events_processed=processed,
        )

    # -- internals -----------------------------------------------------

    def _monitor_tick(self, at: SimTime) -> None:
        for core in self.cores:
            self.settle_core(core, at)
        sample = sample_utilization(
            self.cores, at - self.monitor_period, self.monitor_period, self._busy_prev
        )
        self.samples.append(sample)
        self._busy_prev = {c.id: c.busy_us for c in self.cores}
        if self.audit:
            self._check_conservation(at)
        self.scheduler.on_monitor_tick(sample, at)
        if self.unfinished > 0:
            self.queue.push(at + self.monitor_period, MONITOR_TICK, -1, -1, 0, at)

    def _check_conservation(self, now: SimTime) -> None:
        consumed = sum(t.demand - t.remaining for t in self.tasks)
        busy = sum(c.busy_us for c in self.cores)
        if consumed != busy:
            raise SimulatorError(
                f"conservation broken at {now}: busy {busy} != consumed {consumed}"
            )
