"""Deterministic discrete-event engine.

Time is an integer count of microseconds. Events are ordered by
``(fire_at, seq)`` where ``seq`` is assigned at scheduling time, so ties
resolve FIFO. All randomness in a run comes from one ``random.Random``
stream (CPython's MT19937), seeded once per engine.
"""

from __future__ import annotations

import heapq
import logging
import random
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Callable

logger = logging.getLogger(__name__)

US_PER_S = 1_000_000


def seconds(value: float) -> int:
    """Convert seconds to integer microseconds, rounding to nearest."""
    return int(round(value * US_PER_S))


def to_seconds(us: int) -> float:
    return us / US_PER_S


class EventKind(IntEnum):
    TIMER = 0
    FRAME = 1
    BEACON = 2
    TRAFFIC = 3
    FLOOD = 4
    MAC = 5


@dataclass(slots=True)
class Event:
    fire_at: int
    seq: int
    kind: int = EventKind.TIMER
    target: int = -1
    payload: Any = None
    handler: Callable[["Event"], None] | None = field(default=None, repr=False)
    cancelled: bool = False
    fired: bool = False


# an Event doubles as its own cancellation handle
EventHandle = Event


class SchedulingError(RuntimeError):
    pass


class SimulationAborted(RuntimeError):
    pass


@dataclass
class RunSummary:
    clock: int
    processed: int
    pending: int
    draws: int


class Engine:
    """Single-threaded event loop with a virtual clock and one RNG stream."""

    def __init__(self, seed: int = 1) -> None:
        self.seed = seed
        self.now = 0
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self._processed = 0
        self._draws = 0
        self.rng = random.Random(seed)
        self.nodes: dict[int, Any] = {}

    # node registry -------------------------------------------------------

    def register(self, node_id: int, node: Any) -> None:
        if node_id in self.nodes:
            raise ValueError(f"node {node_id} already registered")
        self.nodes[node_id] = node

    # scheduling ----------------------------------------------------------

    def schedule(self, event: Event) -> EventHandle:
        if event.fire_at < self.now:
            raise SchedulingError(
                f"event at {event.fire_at} us scheduled in the past (clock {self.now} us)"
            )
        event.seq = self._seq
        self._seq += 1
        heapq.heappush(self._heap, (event.fire_at, event.seq, event))
        return event

    def at(
        self,
        fire_at: int,
        handler: Callable[[Event], None],
        kind: int = EventKind.TIMER,
        target: int = -1,
        payload: Any = None,
    ) -> EventHandle:
        return self.schedule(Event(fire_at, 0, kind, target, payload, handler))

    def after(self, delay: int, handler: Callable[[Event], None], **kw: Any) -> EventHandle:
        return self.at(self.now + delay, handler, **kw)

    @staticmethod
    def cancel(handle: EventHandle | None) -> bool:
        if handle is None or handle.cancelled or handle.fired:
            return False
        handle.cancelled = True
        return True

    def peek_time(self) -> int | None:
        heap = self._heap
        while heap and heap[0][2].cancelled:
            heapq.heappop(heap)
        return heap[0][0] if heap else None

    def run_until(self, end: int) -> RunSummary:
        heap = self._heap
        pop = heapq.heappop
        while heap and heap[0][0] <= end:
            t, _, ev = pop(heap)
            if ev.cancelled:
                continue
            self.now = t
            ev.fired = True
            self._processed += 1
            if ev.handler is None:
                continue
            try:
                ev.handler(ev)
            except Exception as exc:
                raise SimulationAborted(
                    f"handler for {EventKind(ev.kind).name} event at t={ev.fire_at} us "
                    f"(target {ev.target}) failed: {exc!r}"
                ) from exc
        if end > self.now:
            self.now = end
        return self.summary()

    def summary(self) -> RunSummary:
        pending = sum(1 for _, _, ev in self._heap if not ev.cancelled)
        return RunSummary(self.now, self._processed, pending, self._draws)

    # randomness ----------------------------------------------------------

    def rng_draw(self, lo: int, hi: int) -> int:
        """Uniform integer in the closed range ``[lo, hi]``."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        self._draws += 1
        return self.rng.randint(lo, hi)

    def rng_below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        if n <= 0:
            raise ValueError(f"empty range [0, {n})")
        self._draws += 1
        return self.rng.randrange(n)

    def rng_unit(self) -> float:
        self._draws += 1
        return self.rng.random()
