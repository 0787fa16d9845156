"""Binary-heap event queue with a (timestamp, sequence) total order.

Events are bare tuples, not objects: the queue is the hottest structure in
the simulator and tuple comparison stays inside the C heap implementation.
Layout: (at, seq, kind, core_id, task_id, epoch).  `seq` is a per-queue
monotone counter, so two events at the same instant pop in insertion order.
`epoch` implements stale-event invalidation: expiry and completion events
record the core's occupancy epoch at scheduling time and are dropped on pop
if the core has been re-dispatched since.  That is cheaper than deleting
arbitrary heap entries.
"""

from __future__ import annotations

import heapq

from .core import SimTime, SimulatorError

# event kinds, ordered roughly by expected frequency
SLICE_EXPIRY = 0
COMPLETION = 1
ARRIVAL = 2
LIMIT_EXPIRY = 3
MONITOR_TICK = 4

KIND_NAMES = {
    SLICE_EXPIRY: "SliceExpiry",
    COMPLETION: "Completion",
    ARRIVAL: "Arrival",
    LIMIT_EXPIRY: "LimitExpiry",
    MONITOR_TICK: "MonitorTick",
}

Event = tuple  # (at, seq, kind, core_id, task_id, epoch)


class PastEventError(SimulatorError):
    """An event was scheduled before the current clock: a scheduler bug."""


class EventQueue:
    __slots__ = ("heap", "_seq")

    def __init__(self) -> None:
        self.heap: list[Event] = []
        self._seq = 0

    def push(self, at: SimTime, kind: int, core_id: int, task_id: int,
             epoch: int, now: SimTime) -> None:
        if at < now:
            raise PastEventError(
                f"{KIND_NAMES.get(kind, kind)} scheduled at {at} with clock already at {now}"
            )
        self._seq += 1
        heapq.heappush(self.heap, (at, self._seq, kind, core_id, task_id, epoch))

    def pop(self) -> Event:
        return heapq.heappop(self.heap)

    def peek_at(self) -> SimTime | None:
        return self.heap[0][0] if self.heap else None

    def __len__(self) -> int:
        return len(self.heap)

    def __bool__(self) -> bool:
        return bool(self.heap)
