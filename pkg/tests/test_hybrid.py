"""Two-group hybrid scheduler: routing, handoff, adaptation, migration.

Frozen numbers were stepped through by hand against the engine rules
(overhead delays service, completion wins quantum ties, first_run is the
dispatch timestamp).  The scripted-migration subclasses fire group moves
from monitor ticks so mid-run state can be captured without reaching into
the event loop.
"""

import random
from collections import Counter, deque

import pytest

from faasched import (DurationWindow, HybridScheduler, PolicyConfig, Simulation,
                      SimulatorError, Task, ms)
from faasched.engine import GROUP_CFS, GROUP_FIFO


def T(tid, arrival, demand, **kw):
    return Task(id=tid, arrival=arrival, demand=demand, memory_mb=128, **kw)


def hybrid(*, fifo=None, limit=None, adapt=False, cls=HybridScheduler, **kw):
    cfg = PolicyConfig(kind="hybrid", preempt_limit_us=limit)
    return cls(cfg, fifo_cores=fifo, adapt_limit=adapt, **kw)


def run(tasks, sched, n_cores, monitor=None):
    sim = Simulation(tasks, sched, n_cores, monitor_period=monitor, audit=True)
    return sim.run()


class ScriptedMigrations(HybridScheduler):
    """Fires planned group migrations from monitor ticks.

    script entries are (at, direction, core_id); each fires on the first
    tick at or after its timestamp and appends a state snapshot.
    """

    def __init__(self, config, *, script=(), **kw):
        super().__init__(config, **kw)
        self._script = deque(script)
        self.snapshots = []

    def on_monitor_tick(self, sample, at):
        super().on_monitor_tick(sample, at)
        while self._script and self._script[0][0] <= at:
            _, direction, cid = self._script.popleft()
            if direction == "to_fifo":
                self.migrate_core_cfs_to_fifo(self.cores[cid], at)
            else:
                self.migrate_core_fifo_to_cfs(self.cores[cid], at)
            self.snapshots.append(self._snapshot(at))

    def _snapshot(self, at):
        return {
            "at": at,
            "fifo_ids": set(self.fifo_ids),
            "cfs_ids": list(self.cfs_ids),
            "queue_lens": {c: len(self.queues[c]) for c in self.cfs_ids},
            "queued_ids": {c: sorted(t.id for _, _, t in self.queues[c])
                           for c in self.cfs_ids},
            "running": {c.id: (c.running.id if c.running else None)
                        for c in self.cores},
            "global": [t.id for t in self.global_q],
            "locked": [c.id for c in self.cores if c.locked],
        }


# -- construction ----------------------------------------------------------


def test_group_split_validation():
    with pytest.raises(SimulatorError):
        Simulation([T(1, 0, 1000)], hybrid(), 1)
    with pytest.raises(SimulatorError):
        Simulation([T(1, 0, 1000)], hybrid(fifo=0), 4)
    with pytest.raises(SimulatorError):
        Simulation([T(1, 0, 1000)], hybrid(fifo=4), 4)


def test_default_split_is_half_the_cores():
    sched = hybrid()
    Simulation([T(1, 0, 1000)], sched, 5)
    assert sched.fifo_ids == {0, 1}
    assert sched.cfs_ids == [2, 3, 4]
    assert [c.group for c in sched.cores] == (
        [GROUP_FIFO] * 2 + [GROUP_CFS] * 3)


# -- routing ---------------------------------------------------------------


def test_arrival_lands_on_an_idle_fifo_core():
    sched = hybrid(fifo=1)
    res = run([T(1, 0, ms(10))], sched, 2)
    task = res.tasks[0]
    assert task.first_run == 0 and task.completion == ms(10)
    assert task.preemptions == 0
    assert res.cores[1].busy_us == 0  # CFS core never touched


def test_arrivals_queue_for_fifo_even_when_cfs_is_idle():
    # one FIFO core, two idle CFS cores: the second task still waits
    sched = hybrid(fifo=1)
    res = run([T(1, 0, ms(10)), T(2, 0, ms(10))], sched, 3)
    second = res.tasks[1]
    assert second.first_run == ms(10)
    assert second.completion == ms(20)
    assert res.cores[1].busy_us == 0 and res.cores[2].busy_us == 0
    assert sched.handoffs == 0


def test_under_limit_task_never_leaves_the_fifo_group():
    sched = hybrid(fifo=1, limit=ms(100))
    res = run([T(1, 0, ms(50))], sched, 2)
    assert res.tasks[0].preemptions == 0
    assert res.cores[1].busy_us == 0
    assert sched.handoffs == 0


def test_demand_equal_to_limit_completes_without_handoff():
    sched = hybrid(fifo=1, limit=ms(50))
    res = run([T(1, 0, ms(50))], sched, 2)
    assert res.tasks[0].preemptions == 0
    assert res.tasks[0].completion == ms(50)
    assert sched.handoffs == 0


# -- limit expiry and handoff ------------------------------------------------


def test_over_limit_task_finishes_on_the_cfs_side():
    # 250ms demand, 100ms limit: 100ms on the FIFO core, 150ms sliced on
    # the CFS core.  Arrival dispatch, handoff placement, and same-task
    # re-picks are all free, so completion lands exactly at 250ms.
    sched = hybrid(fifo=1, limit=ms(100))
    res = run([T(1, 0, ms(250))], sched, 2)
    task = res.tasks[0]
    assert task.preemptions == 1
    assert task.completion == ms(250)
    assert task.vruntime == ms(150)  # vruntime accrues only on CFS
    assert res.cores[0].busy_us == ms(100)
    assert res.cores[0].limit_preemptions == 1
    assert res.cores[1].busy_us == ms(150)
    assert res.cores[0].overhead_us == 0 and res.cores[1].overhead_us == 0
    assert sched.handoffs == 1


class PlacementLog(HybridScheduler):
    def _setup(self):
        super()._setup()
        self.placements = []

    def _handoff(self, task, at):
        before = self.rr_cursor
        super()._handoff(task, at)
        self.placements.append((self.cfs_ids[before % len(self.cfs_ids)], task.id))


def test_handoffs_round_robin_over_the_cfs_cores():
    # five expiries against CFS cores {1, 2, 3} place as 1,2,3,1,2
    tasks = [T(i, 0, ms(150)) for i in range(1, 6)]
    sched = hybrid(fifo=1, limit=ms(100), cls=PlacementLog)
    res = run(tasks, sched, 4)
    assert sched.placements == [(1, 1), (2, 2), (3, 3), (1, 4), (2, 5)]
    by_task = {t.id: t.completion for t in res.tasks}
    # serial through the one FIFO core, 5us pull overhead per dispatch
    assert by_task == {1: 150_000, 2: 250_005, 3: 350_010,
                       4: 450_015, 5: 550_020}
    assert res.cores[0].busy_us == ms(500)
    assert res.cores[0].overhead_us == 20
    assert res.cores[0].limit_preemptions == 5


def test_each_task_hands_off_at_most_once():
    rng = random.Random(11)
    tasks = [T(i, rng.randrange(0, ms(50)), rng.randrange(ms(15), ms(60)))
             for i in range(1, 25)]
    sched = hybrid(fifo=2, limit=ms(10), cls=PlacementLog)
    res = run(tasks, sched, 6)
    assert res.censored == 0
    handed = [tid for _, tid in sched.placements]
    assert len(handed) == len(set(handed)) == 24  # all over-limit, none twice
    counts = Counter(cid for cid, _ in sched.placements)
    assert set(counts) == {2, 3, 4, 5}
    assert max(counts.values()) - min(counts.values()) <= 1


def test_fifo_group_cores_never_slice_preempt():
    rng = random.Random(5)
    tasks = [T(i, rng.randrange(0, ms(200)), rng.randrange(ms(5), ms(400)))
             for i in range(1, 31)]
    sched = hybrid(fifo=3, limit=ms(50))
    res = run(tasks, sched, 8)
    for cid in sched.fifo_ids:
        assert res.cores[cid].slice_preemptions == 0
    for cid in sched.cfs_ids:
        assert res.cores[cid].limit_preemptions == 0
    over = {t.id for t in res.tasks if t.demand > ms(50)}
    assert sched.handoffs == len(over)
    assert sum(c.limit_preemptions for c in res.cores) == len(over)
    for t in res.tasks:
        if t.demand <= ms(50):
            assert t.preemptions == 0


def test_without_a_limit_the_fifo_group_behaves_like_plain_fifo():
    rng = random.Random(3)
    spec = [(i, rng.randrange(0, ms(300)), rng.randrange(ms(1), ms(80)))
            for i in range(1, 31)]

    sched = hybrid(fifo=2)  # adapt off, no limit: FIFO degenerate
    hyb = run([T(*s) for s in spec], sched, 4)
    from faasched import make_scheduler
    fifo = run([T(*s) for s in spec],
               make_scheduler(PolicyConfig(kind="fifo")), 2)

    assert ([(t.id, t.first_run, t.completion) for t in hyb.tasks]
            == [(t.id, t.first_run, t.completion) for t in fifo.tasks])
    assert all(t.preemptions == 0 for t in hyb.tasks)
    assert hyb.cores[2].busy_us == 0 and hyb.cores[3].busy_us == 0


# -- vruntime at handoff -----------------------------------------------------


class JoinLog(HybridScheduler):
    def _setup(self):
        super()._setup()
        self.joins = []

    def _cfs_place(self, cid, task, at):
        dest_min = self._queue_min(cid)
        own = task.vruntime
        super()._cfs_place(cid, task, at)
        self.joins.append((task.id, own, dest_min, task.vruntime))


def test_handoff_vruntime_joins_at_the_destination_minimum():
    # Task 1 (112ms) hands off at 100ms and ratchets core 1's floor to
    # 6000 via its same-task re-pick.  Task 2 hands off later into the
    # then-empty queue and must join at the 6000 floor, not at zero.
    sched = hybrid(fifo=1, limit=ms(100), cls=JoinLog)
    res = run([T(1, 0, 112_000), T(2, 0, ms(300))], sched, 2)
    assert sched.joins == [(1, 0, 0, 0), (2, 0, 6000, 6000)]
    a, b = res.tasks
    assert a.completion == 112_000 and a.preemptions == 1
    assert b.completion == 400_005 and b.preemptions == 1
    assert b.vruntime == 206_000  # 6000 join + 200ms sliced


# -- preemption limit adaptation ---------------------------------------------


def test_completed_durations_feed_the_window():
    # B waits 30ms behind A; recorded durations are completion-first_run,
    # so queueing delay is excluded.  A's 30ms completion drags the limit
    # down to 30ms before B dispatches, which is why B gets handed off.
    sched = hybrid(fifo=1, adapt=True)
    res = run([T(1, 0, ms(30)), T(2, 0, ms(40))], sched, 2)
    assert sched.window.ring == [ms(30), ms(40)]
    assert sched.current_limit() == ms(40)
    a, b = res.tasks
    assert a.preemptions == 0 and a.completion == ms(30)
    assert b.first_run == ms(30) and b.preemptions == 1
    assert b.completion == ms(70)


def test_limit_is_frozen_at_dispatch():
    # A dispatches under the 1633ms default and is mid-segment when B's
    # completion drops the adaptive limit to 50ms.  A must keep its frozen
    # quantum; only C, dispatched after the drop, feels the new limit.
    tasks = [T(1, 0, ms(300)), T(2, 0, ms(50)), T(3, ms(60), ms(300))]
    sched = hybrid(fifo=2, adapt=True)
    res = run(tasks, sched, 3, monitor=ms(100))
    a, b, c = res.tasks
    assert a.preemptions == 0 and a.completion == ms(300)
    assert b.completion == ms(50)
    assert c.first_run == ms(60) and c.preemptions == 1
    assert c.completion == ms(360)
    assert sched.window.ring == [ms(50), ms(300), ms(300)]
    assert sched.current_limit() == ms(300)
    assert sched.limit_series == [[ms(100), ms(50)], [ms(200), ms(50)],
                                  [ms(300), ms(300)], [ms(400), ms(300)]]


def test_series_are_flat_when_rightsizing_is_off():
    rng = random.Random(9)
    tasks = [T(i, rng.randrange(0, ms(100)), rng.randrange(ms(5), ms(120)))
             for i in range(1, 16)]
    sched = hybrid(fifo=2, limit=ms(40))
    res = run(tasks, sched, 4, monitor=ms(20))
    assert res.censored == 0
    assert sched.migration_log == []
    assert all(sizes == [2, 2] for _, *sizes in sched.size_series)
    assert set(sched.extra_series()) == {"limit_us", "group_sizes", "migrations"}


# -- group migration ---------------------------------------------------------


def test_migration_refuses_to_empty_either_group():
    sched = hybrid(fifo=1, limit=ms(10))
    Simulation([T(1, 0, 1000)], sched, 2)
    with pytest.raises(SimulatorError):
        sched.migrate_core_cfs_to_fifo(sched.cores[1], 0)
    with pytest.raises(SimulatorError):
        sched.migrate_core_fifo_to_cfs(sched.cores[0], 0)
    # refusals leave the split untouched
    assert sched.fifo_ids == {0} and sched.cfs_ids == [1]


def test_cfs_core_migration_drains_its_queue_to_the_survivors():
    # 7 long tasks funnel through one FIFO core; round-robin leaves core 1
    # with 4 of them and core 2 with 3.  Migrating core 1 to FIFO preempts
    # its runner and drains its queue onto core 2: 6 queued + 1 running.
    tasks = [T(i, 0, ms(500)) for i in range(1, 8)]
    script = [(ms(100), "to_fifo", 1)]
    sched = hybrid(fifo=1, limit=ms(10), cls=ScriptedMigrations, script=script)
    res = run(tasks, sched, 3, monitor=ms(100))

    snap = sched.snapshots[0]
    assert snap["fifo_ids"] == {0, 1} and snap["cfs_ids"] == [2]
    assert snap["queue_lens"] == {2: 6}
    assert snap["running"][1] is None and snap["running"][2] is not None
    assert set(snap["queued_ids"][2]) | {snap["running"][2]} == set(range(1, 8))
    assert snap["locked"] == []

    assert res.censored == 0
    assert sched.migration_preemptions == 1
    assert sched.handoffs == 7
    assert res.cores[1].group == GROUP_FIFO
    assert sum(c.busy_us for c in res.cores) == 7 * ms(500)


def test_new_cfs_core_gets_a_rebalanced_share_of_the_queues():
    # Queue depths at the migration tick are {4, 2}.  Adding core 1 with a
    # fresh empty queue rebalances to {2, 2, 2}; core 1 is idle so it
    # immediately dispatches one, leaving lengths {1, 2, 2}.
    demands = {i: ms(500) for i in range(1, 11)}
    demands[8] = demands[10] = ms(10)  # finish early, thinning core 3
    tasks = [T(i, 0, d) for i, d in sorted(demands.items())]
    script = [(ms(100), "to_cfs", 1)]
    sched = hybrid(fifo=2, limit=8_000, cls=ScriptedMigrations, script=script)
    res = run(tasks, sched, 4, monitor=ms(100))

    snap = sched.snapshots[0]
    assert snap["fifo_ids"] == {0} and snap["cfs_ids"] == [1, 2, 3]
    assert snap["queue_lens"] == {1: 1, 2: 2, 3: 2}
    assert snap["running"][1] is not None
    live = set()
    for cid in (1, 2, 3):
        live |= set(snap["queued_ids"][cid])
        live.add(snap["running"][cid])
    assert live == set(range(1, 11)) - {8, 10}
    assert snap["locked"] == []

    assert res.censored == 0
    assert sched.handoffs == 10
    assert all(t.done for t in res.tasks)


class EvictionProbe(ScriptedMigrations):
    def _setup(self):
        super()._setup()
        self.evictions = []

    def _evict_legacy(self, core, at):
        victim = core.running
        before = [t.id for t in self.global_q]
        super()._evict_legacy(core, at)
        after = [t.id for t in self.global_q]
        self.evictions.append((at, core.id, victim.id, before, after))


def test_legacy_task_is_evicted_to_the_head_of_the_global_queue():
    # Core 1 flips to CFS at 100ms while still running task 2.  The first
    # handoff (task 1, at its 200ms expiry) lands on core 1 and evicts
    # task 2 to the FRONT of the global queue, ahead of task 3 which has
    # been waiting since 10ms.  Task 2 therefore resumes first on core 0.
    tasks = [T(1, 0, ms(500)), T(2, 0, ms(500)), T(3, ms(10), ms(300))]
    script = [(ms(100), "to_cfs", 1)]
    sched = hybrid(fifo=2, limit=ms(200), cls=EvictionProbe, script=script)
    res = run(tasks, sched, 3, monitor=ms(100))

    assert sched.evictions == [(ms(200), 1, 2, [3], [2, 3])]
    assert sched.migration_preemptions == 1
    b, l, w = res.tasks
    assert l.preemptions == 2  # eviction, then its own limit expiry
    assert l.first_run == 0 and l.completion == 500_005
    assert b.preemptions == 1 and b.completion == 500_005
    assert w.first_run == 400_005 and w.completion == 700_010
    assert sched.handoffs == 3


class RandomChurn(HybridScheduler):
    """Attempts a random legal migration on every monitor tick."""

    def __init__(self, config, *, seed, **kw):
        super().__init__(config, **kw)
        self._rng = random.Random(seed)
        self.churn_moves = 0

    def on_monitor_tick(self, sample, at):
        super().on_monitor_tick(sample, at)
        try:
            if self._rng.random() < 0.5:
                donor = self._rng.choice(sorted(self.cfs_ids))
                self.migrate_core_cfs_to_fifo(self.cores[donor], at)
            else:
                donor = self._rng.choice(sorted(self.fifo_ids))
                self.migrate_core_fifo_to_cfs(self.cores[donor], at)
        except SimulatorError:
            pass  # group already at its floor
        else:
            self.churn_moves += 1


def _churn_workload():
    rng = random.Random(23)
    return [T(i, rng.randrange(0, ms(300)), rng.randrange(ms(5), ms(150)))
            for i in range(1, 41)]


def _churn_run():
    sched = hybrid(fifo=3, limit=ms(20), cls=RandomChurn, seed=99)
    res = run(_churn_workload(), sched, 6, monitor=ms(25))
    return res, sched


def test_tasks_survive_randomized_migration_churn():
    res, sched = _churn_run()
    assert res.censored == 0
    assert all(t.done for t in res.tasks)
    assert sched.churn_moves >= 5
    # groups still partition the cores and labels agree
    assert sched.fifo_ids | set(sched.cfs_ids) == set(range(6))
    assert not sched.fifo_ids & set(sched.cfs_ids)
    assert len(sched.fifo_ids) >= 1 and len(sched.cfs_ids) >= 1
    for core in sched.cores:
        expected = GROUP_FIFO if core.id in sched.fifo_ids else GROUP_CFS
        assert core.group == expected and not core.locked
    assert not sched.global_q
    assert all(not q for q in sched.queues.values())


def test_migration_churn_is_deterministic():
    first, s1 = _churn_run()
    second, s2 = _churn_run()
    assert s1.churn_moves == s2.churn_moves
    assert ([(t.id, t.first_run, t.completion, t.preemptions) for t in first.tasks]
            == [(t.id, t.first_run, t.completion, t.preemptions) for t in second.tasks])
