"""Baseline scheduling policies.

Five single-group policies share the engine's two core primitives:

* ``fifo``          -- run to completion, one global queue
* ``fifo_preempt``  -- FIFO with a fixed preemption time limit
* ``rr``            -- round robin with a fixed quantum
* ``cfs``           -- weight-free approximation of kernel fair scheduling
                       with per-core runqueues ordered by virtual runtime
* ``edf``           -- earliest deadline first, preemptive on arrival

Preemption accounting is deliberately asymmetric.  ``fifo_preempt`` counts
and charges every limit expiry, even when the queue is empty and the same
task is put straight back on the core: the limit models a forced kill and
restart, which costs the same either way.  ``rr`` and ``cfs`` model a
scheduler decision point instead, so picking the incumbent again is free.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from heapq import heappop, heappush

from .core import SimTime, SimulatorError, Task
from .events import LIMIT_EXPIRY

KNOWN_KINDS = ("fifo", "fifo_preempt", "rr", "cfs", "edf", "hybrid")


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "fifo"
    slice_us: SimTime = 6_000
    min_granularity_us: SimTime = 750
    preempt_limit_us: SimTime | None = None
    ctx_switch_overhead_us: SimTime = 5
    deadline_offset_us: SimTime = 1_000_000

    def __post_init__(self) -> None:
        if self.kind not in KNOWN_KINDS:
            raise SimulatorError(f"unknown policy kind {self.kind!r}")
        if self.slice_us <= 0:
            raise SimulatorError(f"slice_us must be positive, got {self.slice_us}")
        if not 0 < self.min_granularity_us <= self.slice_us:
            raise SimulatorError(
                f"min_granularity_us must be in (0, slice_us], got {self.min_granularity_us}"
            )
        if self.preempt_limit_us is not None and self.preempt_limit_us <= 0:
            raise SimulatorError(
                f"preempt_limit_us must be positive or None, got {self.preempt_limit_us}"
            )
        if self.ctx_switch_overhead_us < 0:
            raise SimulatorError("ctx_switch_overhead_us must be non-negative")
        if self.deadline_offset_us <= 0:
            raise SimulatorError("deadline_offset_us must be positive")


class Scheduler:
    """Hook surface the engine drives.  Subclasses own queues and choices."""

    kind = ""

    def __init__(self, config: PolicyConfig) -> None:
        self.cfg = config

    def bind(self, sim) -> None:
        self.sim = sim
        self.cores = sim.cores
        self._setup()

    def _setup(self) -> None:
        pass

    def on_arrival(self, task: Task, at: SimTime) -> None:
        raise NotImplementedError

    def on_task_done(self, task: Task, core, at: SimTime) -> None:
        raise NotImplementedError

    def on_slice_expiry(self, core, at: SimTime) -> None:
        raise SimulatorError(f"{self.kind} scheduled no slices")

    def on_limit_expiry(self, core, at: SimTime) -> None:
        raise SimulatorError(f"{self.kind} scheduled no limits")

    def on_monitor_tick(self, sample, at: SimTime) -> None:
        pass

    def extra_series(self) -> dict[str, list]:
        return {}


class FifoScheduler(Scheduler):
    kind = "fifo"

    def _setup(self) -> None:
        self.ready: deque[Task] = deque()
        # min-heap of core ids, lazily invalidated against core.running
        self.idle_heap = list(range(len(self.cores)))

    def _grab_idle(self):
        while self.idle_heap:
            core = self.cores[heappop(self.idle_heap)]
            if core.running is None and not core.locked:
                return core
        return None

    def _dispatch(self, core, task: Task, at: SimTime, overhead: SimTime) -> None:
        self.sim.start_segment(core, task, at, quantum=None, overhead=overhead)

    def on_arrival(self, task: Task, at: SimTime) -> None:
        core = self._grab_idle()
        if core is not None:
            self._dispatch(core, task, at, 0)
        else:
            self.ready.append(task)

    def on_task_done(self, task: Task, core, at: SimTime) -> None:
        if self.ready:
            self._dispatch(core, self.ready.popleft(), at, 0)
        else:
            heappush(self.idle_heap, core.id)


class FifoPreemptScheduler(FifoScheduler):
    """FIFO where any task occupying a core for the limit is kicked off.

    The kicked task keeps its progress and rejoins the tail of the queue.
    """

    kind = "fifo_preempt"

    def _setup(self) -> None:
        super()._setup()
        if self.cfg.preempt_limit_us is None:
            raise SimulatorError("fifo_preempt requires preempt_limit_us")
        self.limit = self.cfg.preempt_limit_us

    def _dispatch(self, core, task: Task, at: SimTime, overhead: SimTime) -> None:
        self.sim.start_segment(core, task, at, quantum=self.limit,
                               end_kind=LIMIT_EXPIRY, overhead=overhead)

    def on_limit_expiry(self, core, at: SimTime) -> None:
        task = core.running
        self.sim.set_idle(core)
        task.preemptions += 1
        core.limit_preemptions += 1
        self.ready.append(task)
        self._dispatch(core, self.ready.popleft(), at,
                       self.cfg.ctx_switch_overhead_us)


class RoundRobinScheduler(FifoScheduler):
    kind = "rr"

    def _dispatch(self, core, task: Task, at: SimTime, overhead: SimTime) -> None:
        self.sim.start_segment(core, task, at, quantum=self.cfg.slice_us,
                               overhead=overhead)

    def on_slice_expiry(self, core, at: SimTime) -> None:
        task = core.running
        self.sim.set_idle(core)
        self.ready.append(task)
        nxt = self.ready.popleft()
        if nxt is task:
            self._dispatch(core, nxt, at, 0)
        else:
            task.preemptions += 1
            core.slice_preemptions += 1
            self._dispatch(core, nxt, at, self.cfg.ctx_switch_overhead_us)


class CfsScheduler(Scheduler):
    """Fair scheduling approximation: per-core runqueues keyed by vruntime.

    All tasks weigh the same, so vruntime is just accrued service.  The
    quantum divides the slice among the runqueue occupants but never drops
    below the minimum granularity; a queue's minimum vruntime is tracked as
    a monotone floor so empty queues still have a meaningful join point.
    """

    kind = "cfs"

    def _setup(self) -> None:
        n = len(self.cores)
        self.queues: list[list[tuple[SimTime, int, Task]]] = [[] for _ in range(n)]
        self.floors: list[SimTime] = [0] * n

    def _queue_min(self, cid: int) -> SimTime:
        q = self.queues[cid]
        return q[0][0] if q else self.floors[cid]

    def _load(self, cid: int) -> int:
        return len(self.queues[cid]) + (0 if self.cores[cid].running is None else 1)

    def _place(self, task: Task, at: SimTime) -> None:
        cid = min(range(len(self.cores)), key=self._load)
        task.vruntime = max(task.vruntime, self._queue_min(cid))
        core = self.cores[cid]
        if core.running is None:
            self._dispatch(core, task, at, 0)
        else:
            heappush(self.queues[cid], (task.vruntime, task.id, task))

    def _quantum(self, nr: int) -> SimTime:
        return max(self.cfg.slice_us // nr, self.cfg.min_granularity_us)

    def _dispatch(self, core, task: Task, at: SimTime, overhead: SimTime) -> None:
        self.floors[core.id] = max(self.floors[core.id], task.vruntime)
        nr = len(self.queues[core.id]) + 1
        self.sim.start_segment(core, task, at, quantum=self._quantum(nr),
                               overhead=overhead, accrue_vr=True)

    def on_arrival(self, task: Task, at: SimTime) -> None:
        self._place(task, at)

    def on_slice_expiry(self, core, at: SimTime) -> None:
        task = core.running
        self.sim.set_idle(core)
        q = self.queues[core.id]
        heappush(q, (task.vruntime, task.id, task))
        _, _, nxt = heappop(q)
        if nxt is task:
            self._dispatch(core, nxt, at, 0)
        else:
            task.preemptions += 1
            core.slice_preemptions += 1
            self._dispatch(core, nxt, at, self.cfg.ctx_switch_overhead_us)

    def on_task_done(self, task: Task, core, at: SimTime) -> None:
        q = self.queues[core.id]
        if q:
            _, _, nxt = heappop(q)
            self._dispatch(core, nxt, at, 0)


class EdfScheduler(Scheduler):
    """Earliest deadline first across all cores, preemptive on arrival.

    Deadlines default to arrival plus a fixed offset; tasks arriving with a
    deadline already set keep it, which is how non-trivial orderings are
    exercised.
    """

    kind = "edf"

    def _setup(self) -> None:
        self.ready: list[tuple[SimTime, int, Task]] = []
        self.idle_heap = list(range(len(self.cores)))

    def _grab_idle(self):
        while self.idle_heap:
            core = self.cores[heappop(self.idle_heap)]
            if core.running is None and not core.locked:
                return core
        return None

    def _dispatch(self, core, task: Task, at: SimTime, overhead: SimTime) -> None:
        self.sim.start_segment(core, task, at, quantum=None, overhead=overhead)

    def on_arrival(self, task: Task, at: SimTime) -> None:
        if task.deadline is None:
            task.deadline = at + self.cfg.deadline_offset_us
        core = self._grab_idle()
        if core is not None:
            self._dispatch(core, task, at, 0)
            return
        victim = max((c for c in self.cores if c.running is not None),
                     key=lambda c: c.running.deadline, default=None)
        if victim is not None and task.deadline < victim.running.deadline:
            ousted = victim.running
            self.sim.settle_core(victim, at)
            self.sim.set_idle(victim)
            ousted.preemptions += 1
            victim.slice_preemptions += 1
            heappush(self.ready, (ousted.deadline, ousted.id, ousted))
            self._dispatch(victim, task, at, self.cfg.ctx_switch_overhead_us)
        else:
            heappush(self.ready, (task.deadline, task.id, task))

    def on_task_done(self, task: Task, core, at: SimTime) -> None:
        if self.ready:
            _, _, nxt = heappop(self.ready)
            self._dispatch(core, nxt, at, 0)
        else:
            heappush(self.idle_heap, core.id)


def make_scheduler(config: PolicyConfig) -> Scheduler:
    if config.kind == "hybrid":
        from .hybrid import HybridScheduler

        return HybridScheduler(config)
    cls = {
        "fifo": FifoScheduler,
        "fifo_preempt": FifoPreemptScheduler,
        "rr": RoundRobinScheduler,
        "cfs": CfsScheduler,
        "edf": EdfScheduler,
    }[config.kind]
    return cls(config)
