"""Feedback pieces of the hybrid scheduler.

Three independent mechanisms live here, all driven from monitor ticks or
completions inside a simulation:

* a sliding window over recent execution durations that yields the FIFO
  preemption time limit as a configurable percentile,
* windowed per-core utilization sampling,
* the decision rule for moving one core between the FIFO and CFS groups
  when their utilization gap is large enough.

The migrations themselves need scheduler state (queues, running tasks) and
are implemented on the hybrid scheduler; the pure rule lives here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import SimTime, SimulatorError, percentile

# starting limit before any completions feed the window: the 90th
# percentile of a production FaaS duration trace
DEFAULT_INITIAL_LIMIT: SimTime = 1_633_000


@dataclass
class DurationWindow:
    """Ring of the last `capacity` completed-task execution durations."""

    capacity: int = 100
    percentile_p: float = 90.0
    initial_limit: SimTime = DEFAULT_INITIAL_LIMIT
    ring: list[SimTime] = field(default_factory=list)
    _cursor: int = 0

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise SimulatorError(f"window capacity must be >= 1, got {self.capacity}")
        if not 0 < self.percentile_p <= 100:
            raise SimulatorError(f"percentile_p must be in (0, 100], got {self.percentile_p}")

    def add(self, duration: SimTime) -> SimTime | None:
        """Record a duration; returns the evicted one once the ring is full."""
        if len(self.ring) < self.capacity:
            self.ring.append(duration)
            return None
        # overwrite oldest-first once full
        evicted = self.ring[self._cursor]
        self.ring[self._cursor] = duration
        self._cursor = (self._cursor + 1) % self.capacity
        return evicted

    def __len__(self) -> int:
        return len(self.ring)


def update_limit(window: DurationWindow) -> SimTime:
    """Current preemption time limit: a percentile of the window contents.

    An empty window falls back to the configured initial limit.
    """
    if not window.ring:
        return window.initial_limit
    return percentile(window.ring, window.percentile_p)


@dataclass(frozen=True)
class UtilizationSample:
    """Busy time of every core over one monitoring window.

    Stored as integer busy microseconds per core; fractions are derived so
    nothing on the simulation path touches floats.
    """

    window_start: SimTime
    window_len: SimTime
    busy_us: dict[int, SimTime]
    groups: dict[int, str]

    @property
    def per_core_busy_fraction(self) -> dict[int, float]:
        return {cid: busy / self.window_len for cid, busy in self.busy_us.items()}

    def group_average(self, group: str) -> float:
        members = [cid for cid, g in self.groups.items() if g == group]
        if not members:
            return 0.0
        return sum(self.busy_us[cid] for cid in members) / (len(members) * self.window_len)


def sample_utilization(cores, window_start: SimTime, window_len: SimTime,
                       busy_prev: dict[int, SimTime]) -> UtilizationSample:
    """Per-core busy fraction over [window_start, window_start + window_len).

    `busy_prev` maps core id to the busy accumulator value at window start;
    callers are responsible for settling in-flight segments first so the
    accumulators are current.
    """
    if window_len <= 0:
        raise SimulatorError(f"zero-length utilization window at {window_start}")
    busy = {}
    groups = {}
    for core in cores:
        delta = core.busy_us - busy_prev.get(core.id, 0)
        if delta < 0 or delta > window_len:
            raise SimulatorError(
                f"core {core.id} busy delta {delta} outside window of {window_len}"
            )
        busy[core.id] = delta
        groups[core.id] = core.group
    return UtilizationSample(window_start, window_len, busy, groups)


@dataclass(frozen=True)
class RightsizeConfig:
    """When and how aggressively cores migrate between groups."""

    util_threshold: float = 0.20
    check_period: SimTime = 1_000_000
    cooldown: SimTime = 2_000_000
    min_group_size: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.util_threshold < 1:
            raise SimulatorError(f"util_threshold must be in (0,1), got {self.util_threshold}")
        if self.min_group_size < 1:
            raise SimulatorError(f"min_group_size must be >= 1, got {self.min_group_size}")
        if self.check_period <= 0 or self.cooldown < 0:
            raise SimulatorError("check_period must be positive and cooldown non-negative")


MOVE_TO_FIFO = "to_fifo"
MOVE_TO_CFS = "to_cfs"


def rightsize_decision(fifo_avg: float, cfs_avg: float, cfg: RightsizeConfig,
                       fifo_size: int, cfs_size: int) -> str | None:
    """One core leaves the under-utilized group for the busier one, or None.

    The donor group must stay above min_group_size.  Cooldown is enforced by
    the caller, which knows the clock.
    """
    gap = fifo_avg - cfs_avg
    if abs(gap) < cfg.util_threshold:
        return None
    if gap > 0:
        # FIFO is the hot group: take a core from CFS
        return MOVE_TO_FIFO if cfs_size > cfg.min_group_size else None
    return MOVE_TO_CFS if fifo_size > cfg.min_group_size else None
