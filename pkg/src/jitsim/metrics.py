"""Per-run packet accounting: miss ratio, drop ratio, delay and hop statistics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .rtsched import Packet

logger = logging.getLogger(__name__)

CSV_HEADER = (
    "scenario,policy,routing,deadline_s,level,seed,generated,on_time,late,"
    "dropped_mac,dropped_routing,dropped_speed,dropped_drain,miss_ratio,"
    "drop_ratio,avg_delay_ms,max_delay_ms,avg_hops"
)
CSV_COLUMNS = tuple(CSV_HEADER.split(","))

CAUSE_COLUMN = {
    "mac": "mac",
    "no-link": "mac",
    "mac-buffer": "mac",
    "gf-void": "routing",
    "no-route": "routing",
    "vms-overflow": "routing",
    "queue-overflow": "routing",
    "speed-void": "speed",
    "speed-setpoint": "speed",
    "drain-end": "drain",
}

ON_TIME = "on_time"
LATE = "late"
DROPPED = "dropped"


class FateError(RuntimeError):
    pass


@dataclass(slots=True)
class PacketFate:
    packet_id: int
    outcome: str
    level: int = 0
    cause: str = ""
    delay: int = 0
    hops: int = 0


@dataclass
class RunMetrics:
    level: int = 0
    generated: int = 0
    on_time: int = 0
    late: int = 0
    dropped_by_cause: dict[str, int] = field(default_factory=dict)
    delay_sum_us: int = 0
    max_delay_us: int = 0
    hops_sum: int = 0

    @property
    def delivered(self) -> int:
        return self.on_time + self.late

    @property
    def dropped(self) -> int:
        return sum(self.dropped_by_cause.values())

    def dropped_in(self, column: str) -> int:
        return sum(v for c, v in self.dropped_by_cause.items() if CAUSE_COLUMN[c] == column)

    @property
    def miss_ratio(self) -> float:
        return (self.generated - self.on_time) / self.generated if self.generated else 0.0

    @property
    def drop_ratio(self) -> float:
        return self.dropped / self.generated if self.generated else 0.0

    @property
    def avg_delay_us(self) -> float:
        return self.delay_sum_us / self.delivered if self.delivered else 0.0

    @property
    def avg_hops(self) -> float:
        return self.hops_sum / self.delivered if self.delivered else 0.0

    def add(self, fate: PacketFate) -> None:
        if fate.outcome == DROPPED:
            self.dropped_by_cause[fate.cause] = self.dropped_by_cause.get(fate.cause, 0) + 1
            return
        if fate.outcome == ON_TIME:
            self.on_time += 1
        else:
            self.late += 1
        self.delay_sum_us += fate.delay
        self.hops_sum += fate.hops
        if fate.delay > self.max_delay_us:
            self.max_delay_us = fate.delay

    def check(self) -> None:
        if self.on_time + self.late + self.dropped != self.generated:
            raise FateError(
                f"conservation violated: {self.on_time}+{self.late}+{self.dropped} "
                f"!= {self.generated}"
            )
        if self.drop_ratio > self.miss_ratio:
            raise FateError("drop ratio exceeds miss ratio")

    def row(self, scenario: str, policy: str, routing: str, deadline_s: float,
            seed: int) -> dict[str, object]:
        return {
            "scenario": scenario,
            "policy": policy,
            "routing": routing,
            "deadline_s": f"{deadline_s:g}",
            "level": self.level,
            "seed": seed,
            "generated": self.generated,
            "on_time": self.on_time,
            "late": self.late,
            "dropped_mac": self.dropped_in("mac"),
            "dropped_routing": self.dropped_in("routing"),
            "dropped_speed": self.dropped_in("speed"),
            "dropped_drain": self.dropped_in("drain"),
            "miss_ratio": f"{self.miss_ratio:.6f}",
            "drop_ratio": f"{self.drop_ratio:.6f}",
            "avg_delay_ms": f"{self.avg_delay_us / 1000:.4f}",
            "max_delay_ms": f"{self.max_delay_us / 1000:.4f}",
            "avg_hops": f"{self.avg_hops:.4f}",
        }


class Recorder:
    """Assigns exactly one fate to every generated packet."""

    def __init__(self) -> None:
        self.fates: dict[int, PacketFate] = {}
        self.live: dict[int, Packet] = {}
        self.generated = 0
        self.levels: dict[int, int] = {}
        self.duplicates = 0

    def generate(self, packet: Packet) -> None:
        if packet.id in self.live or packet.id in self.fates:
            raise FateError(f"packet id {packet.id} generated twice")
        self.generated += 1
        self.levels[packet.level] = self.levels.get(packet.level, 0) + 1
        self.live[packet.id] = packet

    def record_delivery(self, packet: Packet, at: int) -> PacketFate | None:
        if packet.id in self.fates:
            self.duplicates += 1
            logger.warning("duplicate delivery of packet %d ignored", packet.id)
            return None
        del self.live[packet.id]
        delay = at - packet.created_at
        outcome = ON_TIME if at <= packet.deadline_abs else LATE
        fate = PacketFate(packet.id, outcome, packet.level, "", delay, packet.hops_traveled)
        self.fates[packet.id] = fate
        return fate

    def record_drop(self, packet: Packet, cause: str) -> PacketFate:
        if cause not in CAUSE_COLUMN:
            raise ValueError(f"unknown drop cause {cause!r}")
        if packet.id in self.fates:
            raise FateError(f"packet {packet.id} already has a fate")
        del self.live[packet.id]
        fate = PacketFate(packet.id, DROPPED, packet.level, cause)
        self.fates[packet.id] = fate
        return fate

    def drain(self) -> int:
        """Drop everything still in flight; returns how many."""
        stuck = list(self.live.values())
        for p in stuck:
            self.record_drop(p, "drain-end")
        return len(stuck)

    def finalize(self, per_level: bool = False) -> list[RunMetrics]:
        """Totals first (level 0), then one entry per level when asked."""
        if self.live:
            raise FateError(f"{len(self.live)} packets still in flight at finalize")
        if self.generated == 0:
            logger.warning("no packets generated; ratios reported as 0")
        total = RunMetrics(level=0, generated=self.generated)
        by_level: dict[int, RunMetrics] = {
            lv: RunMetrics(level=lv, generated=c) for lv, c in sorted(self.levels.items())
        }
        for fate in self.fates.values():
            total.add(fate)
            by_level[fate.level].add(fate)
        total.check()
        out = [total]
        if per_level:
            for m in by_level.values():
                m.check()
                out.append(m)
        return out
