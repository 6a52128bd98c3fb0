"""Deployments and traffic schedules for the experiment families."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .engine import seconds

GRID = "grid"
RANDOM = "random"

CONSTANT = "constant"
BURSTY = "bursty"
TWO_LEVEL = "two_level"
LOAD_I = "load_i"
LOAD_II = "load_ii"
LOAD_III = "load_iii"
CONGESTION = "congestion_flows"
TRAFFIC_KINDS = (CONSTANT, BURSTY, TWO_LEVEL, LOAD_I, LOAD_II, LOAD_III, CONGESTION)


@dataclass
class Topology:
    kind: str
    positions: np.ndarray
    sink: int
    area_side: float
    seed: int = 0

    @property
    def node_count(self) -> int:
        """Sensor nodes, the sink excluded."""
        return len(self.positions) - 1

    @property
    def sensors(self) -> list[int]:
        return [i for i in range(len(self.positions)) if i != self.sink]


def build_topology(kind: str = GRID, node_count: int = 100, area_side: float = 1000.0,
                   seed: int = 1) -> Topology:
    """Sensors plus one sink appended as the last node.

    Grid: a square lattice with ``area_side / (side - 1)`` spacing and the
    sink on the (0, 0) corner (north-west, y pointing south). Random: iid
    uniform sensor positions from ``seed`` and the sink at the centre.
    """
    if kind == GRID:
        side = math.isqrt(node_count)
        if side * side != node_count or side < 2:
            raise ValueError("grid node_count must be a square >= 4")
        step = area_side / (side - 1)
        pts = [(i * step, j * step) for i in range(side) for j in range(side)]
        pts.append((0.0, 0.0))
    elif kind == RANDOM:
        rng = random.Random(seed)
        pts = [(rng.uniform(0, area_side), rng.uniform(0, area_side)) for _ in range(node_count)]
        pts.append((area_side / 2, area_side / 2))
    else:
        raise ValueError(f"unknown topology {kind!r}")
    return Topology(kind, np.array(pts, dtype=float), len(pts) - 1, area_side, seed)


@dataclass
class TrafficSpec:
    pattern: str = CONSTANT
    rate_pps: float = 2.0
    deadline_s: float = 1.0
    deadline_l2_s: float | None = None
    sources: int | None = None
    burst_period_s: float = 10.0
    burst_on_s: float = 5.0
    congestion_flow_count: int = 0
    congestion_flow_rate_pps: float = 10.0
    sync_bursts: bool = True

    def __post_init__(self) -> None:
        if not self.rate_pps > 0:
            raise ValueError("rate_pps must be positive")
        if not self.deadline_s > 0:
            raise ValueError("deadline must be positive")
        if self.pattern == TWO_LEVEL:
            if self.deadline_l2_s is None:
                self.deadline_l2_s = 2 * self.deadline_s
            if not math.isclose(self.deadline_s, self.deadline_l2_s / 2):
                raise ValueError("two-level traffic needs deadline_l1 = deadline_l2 / 2")
        if not (0 < self.burst_on_s <= self.burst_period_s):
            raise ValueError("need 0 < burst_on_s <= burst_period_s")

    @property
    def deadline_l1_s(self) -> float:
        return self.deadline_s


def load_profile(which: str) -> TrafficSpec:
    """Load I/II/III: 100 sources @ 1 pps, 100 @ 0.5 pps, 10 @ 1 pps."""
    key = which.lower().removeprefix("load_")
    table = {"i": (100, 1.0), "ii": (100, 0.5), "iii": (10, 1.0)}
    if key not in table:
        raise ValueError(f"unknown load profile {which!r}")
    n, rate = table[key]
    return TrafficSpec(pattern=CONSTANT, rate_pps=rate, sources=n)


def burst_gate(t_rel_us: int, period_us: int, on_us: int) -> bool:
    return t_rel_us % period_us < on_us


@dataclass(order=True, slots=True)
class Emission:
    at: int
    source: int
    level: int = 0
    deadline_us: int = field(default=0, compare=False)


def _periodic(source: int, interval: int, phase: int, start: int, end: int):
    t = start + phase
    while t < end:
        yield t
        t += interval


def pick_sources(candidates: list[int], count: int | None, rng: random.Random) -> list[int]:
    if count is None or count >= len(candidates):
        return list(candidates)
    return sorted(rng.sample(candidates, count))


def emission_schedule(spec: TrafficSpec, sensors: list[int], start: int, duration: int,
                      rng: random.Random, congestion_nodes: list[int] | None = None
                      ) -> list[Emission]:
    """Every packet creation in the generation window, sorted by time.

    Each source gets one phase offset drawn uniformly within its
    inter-packet interval. Bursty and two-level traffic pass emissions
    through a common on/off gate and, with ``sync_bursts``, share phase
    zero so every source fires at the same instants (an event-triggered
    burst). Two-level sources alternate levels 1, 2.
    """
    end = start + duration
    interval = seconds(1.0 / spec.rate_pps)
    sources = pick_sources(sensors, spec.sources, rng)
    out: list[Emission] = []
    gated = spec.pattern in (BURSTY, TWO_LEVEL)
    period, on = seconds(spec.burst_period_s), seconds(spec.burst_on_s)
    d1 = seconds(spec.deadline_s)
    d2 = seconds(spec.deadline_l2_s) if spec.deadline_l2_s is not None else d1
    for s in sources:
        phase = rng.randrange(interval)
        if gated and spec.sync_bursts:
            phase = 0
        k = 0
        for t in _periodic(s, interval, phase, start, end):
            if gated and not burst_gate(t - start, period, on):
                continue
            if spec.pattern == TWO_LEVEL:
                level = 1 + (k % 2)
                out.append(Emission(t, s, level, d1 if level == 1 else d2))
            else:
                out.append(Emission(t, s, 0, d1))
            k += 1
    if congestion_nodes:
        cint = seconds(1.0 / spec.congestion_flow_rate_pps)
        for s in congestion_nodes:
            phase = rng.randrange(cint)
            out.extend(Emission(t, s, 0, d1) for t in _periodic(s, cint, phase, start, end))
    out.sort()
    return out


def expected_count(spec: TrafficSpec, n_sources: int, duration_s: float) -> int:
    """Closed-form packet count for whole-interval windows."""
    per = spec.rate_pps * duration_s
    if spec.pattern in (BURSTY, TWO_LEVEL):
        per *= spec.burst_on_s / spec.burst_period_s
    return round(per * n_sources)


def congestion_sources(topo: Topology, count: int, rng: random.Random) -> list[int]:
    """Intermediate nodes: neither the sink nor its one-hop neighbours' edge."""
    sink_pos = topo.positions[topo.sink]
    d = np.sqrt(((topo.positions - sink_pos) ** 2).sum(axis=1))
    mid = [i for i in topo.sensors if 0.3 * topo.area_side <= d[i] <= 0.8 * topo.area_side]
    pool = mid or topo.sensors
    return sorted(rng.sample(pool, min(count, len(pool))))
