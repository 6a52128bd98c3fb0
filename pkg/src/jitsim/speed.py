"""Simplified SPEED forwarding: SNGF plus the SPEED-T and SPEED-S selectors.

Neighbour tables are filled by periodic position beacons and never expire
within a run. Per-neighbour hop delay is the sender's smoothed one-hop
delay estimate for that link.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .routing import RoutingDrop, euclid

SPEED = "speed"
SPEED_T = "speed_t"
SPEED_S = "speed_s"
VARIANTS = (SPEED, SPEED_T, SPEED_S)


@dataclass
class SpeedConfig:
    setpoint_mps: float = 1000.0
    beacon_period_s: float = 1.0
    variant: str = SPEED

    def __post_init__(self) -> None:
        if not self.setpoint_mps > 0:
            raise ValueError("setpoint_mps must be positive")
        if not self.beacon_period_s > 0:
            raise ValueError("beacon_period_s must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown SPEED variant {self.variant!r}")


@dataclass(frozen=True, slots=True)
class SpeedNeighbor:
    id: int
    progress: float
    hop_delay: float

    @property
    def speed(self) -> float:
        """Relay speed in m/s (hop_delay is in microseconds)."""
        return self.progress * 1_000_000 / self.hop_delay


def forwarding_set(node: int, table: Sequence[int], positions: np.ndarray, dest: int,
                   delay_of: Callable[[int], float]) -> list[SpeedNeighbor]:
    here = euclid(positions[node], positions[dest])
    fs = []
    for j in sorted(table):
        prog = here - euclid(positions[j], positions[dest])
        if prog > 0:
            fs.append(SpeedNeighbor(j, prog, delay_of(j)))
    return fs


def sngf_select(fs: Sequence[SpeedNeighbor], setpoint_mps: float,
                draw: Callable[[], float]) -> int:
    """Stateless non-deterministic choice among neighbours meeting the setpoint.

    The relay ratio is the fraction of the forwarding set at or above the
    setpoint. The packet is dropped with probability ``1 - ratio``;
    otherwise a qualifying neighbour is picked with probability
    proportional to its relay speed.
    """
    if not fs:
        raise RoutingDrop("speed-void")
    cands = [nb for nb in fs if nb.speed >= setpoint_mps]
    if not cands:
        raise RoutingDrop("speed-setpoint")
    if len(cands) < len(fs) and draw() >= len(cands) / len(fs):
        raise RoutingDrop("speed-setpoint")
    if len(cands) == 1:
        return cands[0].id
    speeds = [nb.speed for nb in cands]
    u = draw() * sum(speeds)
    acc = 0.0
    for nb, s in zip(cands, speeds):
        acc += s
        if u < acc:
            return nb.id
    return cands[-1].id


def speed_t_select(fs: Sequence[SpeedNeighbor]) -> int:
    """Minimal one-hop delay first."""
    if not fs:
        raise RoutingDrop("speed-void")
    return min(fs, key=lambda nb: (nb.hop_delay, nb.id)).id


def speed_s_select(fs: Sequence[SpeedNeighbor]) -> int:
    """Maximal relay speed first."""
    if not fs:
        raise RoutingDrop("speed-void")
    return min(fs, key=lambda nb: (-nb.speed, nb.id)).id


class SpeedTables:
    """Beacon-learned neighbour ids per node."""

    def __init__(self, n: int) -> None:
        self.tables: list[set[int]] = [set() for _ in range(n)]

    def hear_beacon(self, node: int, sender: int) -> None:
        self.tables[node].add(sender)

    def __getitem__(self, node: int) -> set[int]:
        return self.tables[node]
