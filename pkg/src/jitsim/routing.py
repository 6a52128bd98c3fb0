"""Shortest-path (hop count) and greedy geographic routing.

Distances are expressed in the routing protocol's own metric: hops for SP,
meters for GF. The schedulers only see them through ``DistanceInfo``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

SP = "sp"
GF = "gf"


class RoutingDrop(Exception):
    """Packet cannot be forwarded; ``cause`` names the drop category."""

    def __init__(self, cause: str) -> None:
        super().__init__(cause)
        self.cause = cause


@dataclass(frozen=True, slots=True)
class RouteEntry:
    next_hop: int
    metric: float
    advert_seq: int = 0


@dataclass(frozen=True, slots=True)
class DistanceInfo:
    e2e: float
    one_hop: float
    remaining: float


@dataclass(frozen=True, slots=True)
class Advert:
    sink: int
    seq: int
    hops: int


class SpTable:
    """Per-node min-hop routes learned from sink advertisement floods.

    A refresh flood can reach a node first along a longer path. Until the
    new round offers a route as short as the previous round's, forwarding
    keeps the previous route (a settling period in the DSDV sense).
    """

    def __init__(self, n: int, sink: int) -> None:
        self.sink = sink
        self.entries: list[RouteEntry | None] = [None] * n
        self.previous: list[RouteEntry | None] = [None] * n
        self.entries[sink] = RouteEntry(sink, 0, 0)
        self.seq = 0

    def new_advert(self) -> Advert:
        self.seq += 1
        self.entries[self.sink] = RouteEntry(self.sink, 0, self.seq)
        return Advert(self.sink, self.seq, 0)

    def hear(self, node: int, sender: int, adv: Advert) -> Advert | None:
        """Apply an advert heard from ``sender``; returns the advert to
        re-broadcast, or None when nothing changed."""
        if node == self.sink:
            return None
        cand = adv.hops + 1
        cur = self.entries[node]
        if cur is None or adv.seq > cur.advert_seq or (
            adv.seq == cur.advert_seq and cand < cur.metric
        ):
            if cur is not None and adv.seq > cur.advert_seq:
                self.previous[node] = cur
            self.entries[node] = RouteEntry(sender, cand, adv.seq)
            return Advert(adv.sink, adv.seq, cand)
        return None

    def route(self, node: int) -> RouteEntry:
        entry = self.entries[node]
        if entry is None:
            raise RoutingDrop("no-route")
        prev = self.previous[node]
        if prev is not None and prev.advert_seq == entry.advert_seq - 1 \
                and prev.metric < entry.metric:
            return prev
        return entry

    def hops(self, node: int) -> int:
        return int(self.route(node).metric)


def euclid(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def gf_next_hop(node: int, positions: np.ndarray, neighbors: Sequence[int],
                sink: int) -> int:
    """Neighbour strictly closer to the sink than ``node``, closest first,
    lowest id on ties. The sink itself wins whenever it is a neighbour."""
    if sink in neighbors:
        return sink
    sp = positions[sink]
    own = euclid(positions[node], sp)
    best, best_d = -1, own
    for j in sorted(neighbors):
        d = euclid(positions[j], sp)
        if d < best_d:
            best, best_d = j, d
    if best < 0:
        raise RoutingDrop("gf-void")
    return best


def gf_progress(node: int, nxt: int, positions: np.ndarray, sink: int,
                fallback: float) -> float:
    """Distance-to-sink reduction of one hop; ``fallback`` when under 1 m."""
    sp = positions[sink]
    prog = euclid(positions[node], sp) - euclid(positions[nxt], sp)
    return prog if prog >= 1.0 else fallback


def eetd(etd: float, dist: DistanceInfo) -> float:
    """End-to-end transmission delay estimate: ETD scaled by e2e / one-hop."""
    if not dist.one_hop > 0:
        raise ValueError("one-hop distance must be positive")
    return etd * dist.e2e / dist.one_hop


def sp_distance(table: SpTable, node: int, source_hops: int | None) -> DistanceInfo:
    h = table.hops(node)
    e2e = h if source_hops is None else source_hops
    return DistanceInfo(float(e2e), 1.0, float(h))


def gf_distance(node: int, nxt: int, positions: np.ndarray, sink: int,
                source_dist: float | None, tx_range: float,
                one_hop_mode: str = "progress") -> DistanceInfo:
    rem = euclid(positions[node], positions[sink])
    if one_hop_mode == "range":
        one = tx_range
    else:
        one = gf_progress(node, nxt, positions, sink, tx_range)
    # a forwarder always has at least one hop left
    rem = max(rem, one)
    e2e = rem if source_dist is None else max(source_dist, one)
    return DistanceInfo(e2e, one, rem)
