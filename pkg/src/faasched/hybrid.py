"""Two-group hybrid scheduler: FIFO with a time limit feeding CFS.

Arrivals always enter a single global FIFO queue served by the FIFO core
group.  A task that occupies a FIFO core continuously for the preemption
time limit is handed off, exactly once, to the CFS group, where it time-
slices with the other long tasks.  The limit is either fixed or adapted as
a percentile over a sliding window of recently observed execution
durations; group sizes can in turn be rightsized by migrating cores
between groups when windowed utilization says one group is starved.

Semantics worth calling out:

* Handoff placement round-robins over the CFS cores; the migrated task's
  vruntime joins at the destination queue's minimum so it neither starves
  nor monopolizes.
* The limit in force is frozen into each FIFO dispatch.  Adaptation only
  affects later dispatches, never an in-flight segment.
* Group migration is eager in the CFS-to-FIFO direction (the five-step
  lock/preempt/drain/flip/unlock protocol) and lazy in the other: a core
  joining CFS keeps running its FIFO-era task until something is placed
  on its new runqueue, at which point the holdover is preempted back to
  the head of the global queue.
* Rebalancing moves the largest-vruntime task from the longest queue to
  the shortest until queue lengths differ by at most one.  Completion
  beats limit expiry at equal timestamps, so a task never migrates with
  zero remaining work.
"""

from __future__ import annotations

import math
from bisect import bisect_left, insort
from collections import deque
from heapq import heapify, heappop, heappush

from .adaptation import (
    MOVE_TO_FIFO,
    DurationWindow,
    RightsizeConfig,
    rightsize_decision,
)
from .core import SimTime, SimulatorError, Task
from .engine import GROUP_CFS, GROUP_FIFO
from .events import LIMIT_EXPIRY
from .policies import PolicyConfig, Scheduler


class HybridScheduler(Scheduler):
    kind = "hybrid"

    def __init__(self, config: PolicyConfig, *,
                 fifo_cores: int | None = None,
                 window: DurationWindow | None = None,
                 rightsize: RightsizeConfig | None = None,
                 adapt_limit: bool = True) -> None:
        super().__init__(config)
        self.fifo_cores_init = fifo_cores
        if window is None:
            if config.preempt_limit_us is not None:
                window = DurationWindow(initial_limit=config.preempt_limit_us)
            else:
                window = DurationWindow()
        self.window = window
        self.rightsize = rightsize
        self.adapt_limit = adapt_limit

    def _setup(self) -> None:
        n = len(self.cores)
        if n < 2:
            raise SimulatorError("hybrid needs at least 2 cores")
        f = self.fifo_cores_init if self.fifo_cores_init is not None else max(1, n // 2)
        if not 1 <= f <= n - 1:
            raise SimulatorError(f"fifo_cores must be in [1, {n - 1}], got {f}")
        self.fifo_ids: set[int] = set(range(f))
        self.cfs_ids: list[int] = list(range(f, n))
        for core in self.cores:
            core.group = GROUP_FIFO if core.id in self.fifo_ids else GROUP_CFS
        self.global_q: deque[Task] = deque()
        self.fifo_idle: list[int] = sorted(self.fifo_ids)
        self.queues: dict[int, list[tuple[SimTime, int, Task]]] = {
            cid: [] for cid in self.cfs_ids
        }
        self.floors: dict[int, SimTime] = {cid: 0 for cid in self.cfs_ids}
        self.rr_cursor = 0
        self.handoffs = 0
        self.migration_preemptions = 0
        # cores that joined CFS while still running their FIFO-era task
        self._legacy: set[int] = set()
        self._sorted: list[SimTime] = []
        if self.adapt_limit:
            self._fixed_limit = None
        else:
            # None here means no limit at all: the FIFO group runs to completion
            self._fixed_limit = self.cfg.preempt_limit_us
        self._tick_avgs: list[tuple[float, float]] = []
        self._next_check = self.rightsize.check_period if self.rightsize else 0
        self._last_migration: SimTime | None = None
        self.limit_series: list[list] = []
        self.size_series: list[list] = []
        self.migration_log: list[list] = []

    # -- preemption limit ------------------------------------------------

    def current_limit(self) -> SimTime | None:
        if not self.adapt_limit:
            return self._fixed_limit
        if not self._sorted:
            return self.window.initial_limit
        rank = math.ceil(self.window.percentile_p / 100 * len(self._sorted))
        return self._sorted[rank - 1]

    def _record_duration(self, duration: SimTime) -> None:
        evicted = self.window.add(duration)
        if not self.adapt_limit:
            return
        insort(self._sorted, duration)
        if evicted is not None:
            del self._sorted[bisect_left(self._sorted, evicted)]

    # -- FIFO side ---------------------------------------------------------

    def _grab_fifo_idle(self):
        while self.fifo_idle:
            cid = heappop(self.fifo_idle)
            core = self.cores[cid]
            if cid in self.fifo_ids and core.running is None and not core.locked:
                return core
        return None

    def _fifo_dispatch(self, core, task: Task, at: SimTime, overhead: SimTime) -> None:
        self.sim.start_segment(core, task, at, quantum=self.current_limit(),
                               end_kind=LIMIT_EXPIRY, overhead=overhead)

    def _fifo_pull(self, core, at: SimTime, overhead: SimTime) -> None:
        if self.global_q:
            self._fifo_dispatch(core, self.global_q.popleft(), at, overhead)
        else:
            heappush(self.fifo_idle, core.id)

    def _drain_global(self, at: SimTime) -> None:
        while self.global_q:
            core = self._grab_fifo_idle()
            if core is None:
                return
            self._fifo_dispatch(core, self.global_q.popleft(), at, 0)

    # -- CFS side ----------------------------------------------------------

    def _queue_min(self, cid: int) -> SimTime:
        q = self.queues[cid]
        return q[0][0] if q else self.floors[cid]

    def _cfs_place(self, cid: int, task: Task, at: SimTime) -> None:
        core = self.cores[cid]
        if core.locked:
            raise SimulatorError(f"placement on locked core {cid} at {at}")
        task.vruntime = max(task.vruntime, self._queue_min(cid))
        heappush(self.queues[cid], (task.vruntime, task.id, task))
        if core.running is None:
            self._cfs_next(core, at, 0)
        elif cid in self._legacy:
            self._evict_legacy(core, at)

    def _cfs_dispatch(self, core, task: Task, at: SimTime, overhead: SimTime) -> None:
        self.floors[core.id] = max(self.floors[core.id], task.vruntime)
        nr = len(self.queues[core.id]) + 1
        quantum = max(self.cfg.slice_us // nr, self.cfg.min_granularity_us)
        self.sim.start_segment(core, task, at, quantum=quantum,
                               overhead=overhead, accrue_vr=True)

    def _cfs_next(self, core, at: SimTime, overhead: SimTime) -> None:
        q = self.queues[core.id]
        if not q:
            return
        _, _, task = heappop(q)
        self._cfs_dispatch(core, task, at, overhead)

    def _evict_legacy(self, core, at: SimTime) -> None:
        """New work reached a core still running its FIFO-era task."""
        task = core.running
        self.sim.settle_core(core, at)
        self.sim.set_idle(core)
        self._legacy.discard(core.id)
        task.preemptions += 1
        self.migration_preemptions += 1
        self.global_q.appendleft(task)
        self._cfs_next(core, at, self.cfg.ctx_switch_overhead_us)
        self._drain_global(at)

    def _handoff(self, task: Task, at: SimTime) -> None:
        cid = self.cfs_ids[self.rr_cursor % len(self.cfs_ids)]
        self.rr_cursor += 1
        self.handoffs += 1
        self._cfs_place(cid, task, at)

    # -- engine hooks --------------------------------------------------------

    def on_arrival(self, task: Task, at: SimTime) -> None:
        core = self._grab_fifo_idle()
        if core is not None:
            self._fifo_dispatch(core, task, at, 0)
        else:
            self.global_q.append(task)

    def on_limit_expiry(self, core, at: SimTime) -> None:
        task = core.running
        self.sim.set_idle(core)
        self._legacy.discard(core.id)
        task.preemptions += 1
        core.limit_preemptions += 1
        self._handoff(task, at)
        # the handoff itself may have re-occupied this core (legacy case)
        if core.running is None:
            if core.id in self.fifo_ids:
                self._fifo_pull(core, at, self.cfg.ctx_switch_overhead_us)
            else:
                self._cfs_next(core, at, self.cfg.ctx_switch_overhead_us)

    def on_slice_expiry(self, core, at: SimTime) -> None:
        task = core.running
        self.sim.set_idle(core)
        q = self.queues[core.id]
        heappush(q, (task.vruntime, task.id, task))
        _, _, nxt = heappop(q)
        if nxt is task:
            self._cfs_dispatch(core, nxt, at, 0)
        else:
            task.preemptions += 1
            core.slice_preemptions += 1
            self._cfs_dispatch(core, nxt, at, self.cfg.ctx_switch_overhead_us)

    def on_task_done(self, task: Task, core, at: SimTime) -> None:
        self._record_duration(task.completion - task.first_run)
        self._legacy.discard(core.id)
        if core.id in self.fifo_ids:
            self._fifo_pull(core, at, 0)
        else:
            self._cfs_next(core, at, 0)

    def on_monitor_tick(self, sample, at: SimTime) -> None:
        self.limit_series.append([at, self.current_limit()])
        self.size_series.append([at, len(self.fifo_ids), len(self.cfs_ids)])
        if self.rightsize is None:
            return
        self._tick_avgs.append(
            (sample.group_average(GROUP_FIFO), sample.group_average(GROUP_CFS))
        )
        if at < self._next_check:
            return
        fifo_avg = sum(a for a, _ in self._tick_avgs) / len(self._tick_avgs)
        cfs_avg = sum(b for _, b in self._tick_avgs) / len(self._tick_avgs)
        self._tick_avgs.clear()
        self._next_check = at + self.rightsize.check_period
        move = rightsize_decision(fifo_avg, cfs_avg, self.rightsize,
                                  len(self.fifo_ids), len(self.cfs_ids))
        if move is None:
            return
        if (self._last_migration is not None
                and at - self._last_migration < self.rightsize.cooldown):
            return
        if move == MOVE_TO_FIFO:
            donor = min(self.cfs_ids, key=lambda c: (sample.busy_us.get(c, 0), c))
            self.migrate_core_cfs_to_fifo(self.cores[donor], at)
        else:
            donor = min(self.fifo_ids, key=lambda c: (sample.busy_us.get(c, 0), c))
            self.migrate_core_fifo_to_cfs(self.cores[donor], at)
        self._last_migration = at
        self.migration_log.append([at, move])

    # -- group migration -------------------------------------------------------

    def migrate_core_cfs_to_fifo(self, core, at: SimTime) -> None:
        """Five steps: lock, preempt runner, drain queue, flip, unlock."""
        floor = self.rightsize.min_group_size if self.rightsize else 1
        if len(self.cfs_ids) <= floor:
            raise SimulatorError("refusing to migrate the last CFS core")
        core.locked = True
        self.cfs_ids.remove(core.id)
        if core.running is not None:
            task = core.running
            self.sim.settle_core(core, at)
            self.sim.set_idle(core)
            self._legacy.discard(core.id)
            task.preemptions += 1
            self.migration_preemptions += 1
            dest = min(self.cfs_ids, key=lambda c: (len(self.queues[c]), c))
            self._cfs_place(dest, task, at)
        drained = sorted(self.queues.pop(core.id))
        self.floors.pop(core.id)
        for entry in drained:
            dest = min(self.cfs_ids, key=lambda c: (len(self.queues[c]), c))
            heappush(self.queues[dest], entry)
        self._rebalance(at)
        self.fifo_ids.add(core.id)
        core.group = GROUP_FIFO
        core.locked = False
        heappush(self.fifo_idle, core.id)
        self._drain_global(at)

    def migrate_core_fifo_to_cfs(self, core, at: SimTime) -> None:
        """Flip a FIFO core into the CFS group with a fresh runqueue.

        A task running on it is left in place and lazily preempted back to
        the head of the global queue the next time work is put on this
        core; the fresh queue is then filled by rebalancing.
        """
        floor = self.rightsize.min_group_size if self.rightsize else 1
        if len(self.fifo_ids) <= floor:
            raise SimulatorError("refusing to migrate the last FIFO core")
        core.locked = True
        self.fifo_ids.discard(core.id)
        self.queues[core.id] = []
        self.floors[core.id] = min(self._queue_min(c) for c in self.cfs_ids)
        self.cfs_ids.append(core.id)
        self.cfs_ids.sort()
        core.group = GROUP_CFS
        if core.running is not None:
            self._legacy.add(core.id)
        core.locked = False
        self._rebalance(at)

    def _rebalance(self, at: SimTime) -> None:
        """Even out CFS queue lengths to a spread of at most one."""
        while True:
            longest = max(self.cfs_ids, key=lambda c: (len(self.queues[c]), -c))
            shortest = min(self.cfs_ids, key=lambda c: (len(self.queues[c]), c))
            src, dst = self.queues[longest], self.queues[shortest]
            if len(src) - len(dst) <= 1:
                break
            entry = max(src)
            src.remove(entry)
            heapify(src)
            heappush(dst, entry)
        for cid in self.cfs_ids:
            cr = self.cores[cid]
            if not self.queues[cid] or cr.locked:
                continue
            if cr.running is None:
                self._cfs_next(cr, at, 0)
            elif cid in self._legacy:
                self._evict_legacy(cr, at)

    def extra_series(self) -> dict[str, list]:
        return {
            "limit_us": self.limit_series,
            "group_sizes": self.size_series,
            "migrations": self.migration_log,
        }
