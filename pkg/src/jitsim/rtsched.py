"""Network-layer packet schedulers.

JiTS keeps one priority queue per node keyed by target transmission time
and releases the head from a timer. VMS keeps three fixed-priority FIFOs
and never delays on purpose. The plain FIFO is used by SPEED.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

from .routing import DistanceInfo

FIFO = "fifo"
JITS_S = "jits_s"
JITS_D = "jits_d"
JITS_NL = "jits_nl"
VMS_S = "vms_s"
VMS_D = "vms_d"

JITS_POLICIES = (JITS_S, JITS_D, JITS_NL)
VMS_POLICIES = (VMS_S, VMS_D)
POLICIES = (FIFO,) + JITS_POLICIES + VMS_POLICIES


@dataclass(slots=True)
class Packet:
    id: int
    source: int
    sink: int
    created_at: int
    deadline_rel: int
    level: int = 0
    hops_traveled: int = 0
    src_metric: float = 0.0
    vms_class: int = 0
    hop_times: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.deadline_rel <= 0:
            raise ValueError("relative deadline must be positive")

    @property
    def deadline_abs(self) -> int:
        return self.created_at + self.deadline_rel


@dataclass
class SchedulerConfig:
    policy: str = JITS_D
    alpha: float = 0.7
    queue_capacity: int = 64
    idle_detection: bool = False
    vms_t1_mps: float = 500.0
    vms_t2_mps: float = 1500.0

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        if self.queue_capacity < 1:
            raise ValueError("queue_capacity must be >= 1")
        if not (0 < self.vms_t1_mps < self.vms_t2_mps):
            raise ValueError("VMS thresholds must be positive and strictly increasing")


def target_delay(policy: str, packet: Packet, dist: DistanceInfo, etd: float,
                 now: int, alpha: float = 0.7) -> int:
    """Intentional queuing delay in microseconds, clamped at zero.

    ``dist`` must come from the matching distance mode: source-to-sink
    ``e2e`` for jits_s, forwarder-to-sink for jits_d and jits_nl. The per-hop
    share ``one_hop / e2e`` reduces to ``1 / h`` under hop-count routing.
    """
    if policy not in JITS_POLICIES:
        return 0
    if not dist.one_hop > 0:
        raise ValueError("one-hop distance must be positive")
    eetd = etd * dist.e2e / dist.one_hop
    if policy == JITS_S:
        budget = packet.deadline_rel - eetd
    else:
        budget = packet.deadline_abs - now - eetd
    if budget <= 0:
        return 0
    if policy == JITS_NL:
        delay = budget * alpha / 2.0 ** (dist.remaining / dist.one_hop)
    else:
        delay = budget * alpha * dist.one_hop / dist.e2e
    return max(0, round(delay))


def vms_velocity(dist_m: float, slack_us: int) -> float:
    if slack_us <= 0:
        return float("inf")
    return dist_m * 1_000_000 / slack_us


def vms_priority(dist_m: float, slack_us: int, t1: float = 500.0, t2: float = 1500.0) -> int:
    """Priority class from required velocity; 0 is the most urgent."""
    v = vms_velocity(dist_m, slack_us)
    if v >= t2:
        return 0
    if v >= t1:
        return 1
    return 2


@dataclass(slots=True)
class QueuedPacket:
    packet: Packet
    target_tx_at: int
    enqueued_at: int
    next_hop: int = -1


class JitsQueue:
    """Bounded priority queue ordered by (target_tx_at, arrival order).

    Inserting into a full queue evicts the head first; the caller forwards
    it immediately, so nothing is ever dropped here.
    """

    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self._heap: list[tuple[int, int, QueuedPacket]] = []
        self._seq = 0
        self.enqueued = 0
        self.dispatched = 0
        self.max_occupancy = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, qp: QueuedPacket) -> QueuedPacket | None:
        if qp.target_tx_at < qp.enqueued_at:
            raise ValueError("target time precedes enqueue time")
        evicted = self.pop() if len(self._heap) >= self.capacity else None
        heapq.heappush(self._heap, (qp.target_tx_at, self._seq, qp))
        self._seq += 1
        self.enqueued += 1
        if len(self._heap) > self.max_occupancy:
            self.max_occupancy = len(self._heap)
        return evicted

    def head(self) -> QueuedPacket | None:
        return self._heap[0][2] if self._heap else None

    def pop(self) -> QueuedPacket:
        self.dispatched += 1
        return heapq.heappop(self._heap)[2]


class VmsQueues:
    """Three FIFOs, class 0 served first; overflow drops the arriving packet."""

    def __init__(self, capacity: int) -> None:
        self.per_class = max(1, capacity // 3)
        self.queues: tuple[deque, deque, deque] = (deque(), deque(), deque())

    def __len__(self) -> int:
        return sum(len(q) for q in self.queues)

    def push(self, qp: QueuedPacket, cls: int) -> bool:
        q = self.queues[cls]
        if len(q) >= self.per_class:
            return False
        q.append(qp)
        return True

    def pop(self) -> QueuedPacket | None:
        for q in self.queues:
            if q:
                return q.popleft()
        return None


class FifoQueue:
    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self.q: deque = deque()

    def __len__(self) -> int:
        return len(self.q)

    def push(self, qp: QueuedPacket) -> bool:
        if len(self.q) >= self.capacity:
            return False
        self.q.append(qp)
        return True

    def pop(self) -> QueuedPacket | None:
        return self.q.popleft() if self.q else None
