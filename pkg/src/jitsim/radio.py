"""Reduced 802.11 DCF radio model and one-hop delay estimation.

Each node's MAC serves one frame at a time: carrier sense, DIFS, uniform
backoff in ``[0, CW)`` that freezes while the medium is busy, a single
channel occupancy covering DATA + SIFS + ACK, and binary-exponential CW
growth on failure. A unicast succeeds iff its receiver saw no overlapping
transmission for the whole exchange. Control broadcasts (route adverts,
beacons) occupy the medium like any frame but are always received.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol

import numpy as np

from .channel import INF, Medium
from .engine import Engine, EventKind

BROADCAST = -1


@dataclass
class RadioConfig:
    tx_range_m: float = 250.0
    interference_range_m: float = 550.0
    bandwidth_bps: int = 2_000_000
    basic_rate_bps: int = 1_000_000
    slot_us: int = 20
    difs_us: int = 50
    sifs_us: int = 10
    cw_min: int = 31
    cw_max: int = 1023
    retry_limit: int = 7
    etd_beta: float = 0.8
    phy_header_us: int = 192
    mac_header_bytes: int = 28
    net_header_bytes: int = 20
    ack_bytes: int = 14
    data_bytes: int = 32
    control_bytes: int = 32
    mac_buffer: int = 8

    def __post_init__(self) -> None:
        if not (self.interference_range_m >= self.tx_range_m > 0):
            raise ValueError("need interference_range_m >= tx_range_m > 0")
        if not (1 <= self.cw_min <= self.cw_max):
            raise ValueError("need 1 <= cw_min <= cw_max")
        if self.retry_limit < 1:
            raise ValueError("retry_limit must be >= 1")
        if not (0.0 <= self.etd_beta < 1.0):
            raise ValueError("etd_beta must lie in [0, 1)")
        if self.bandwidth_bps <= 0 or self.basic_rate_bps <= 0:
            raise ValueError("bandwidth and basic rate must be positive")
        if self.slot_us <= 0 or self.difs_us < 0 or self.sifs_us < 0:
            raise ValueError("slot must be positive, difs and sifs non-negative")
        if self.mac_buffer < 0:
            raise ValueError("mac_buffer must be >= 0")

    def payload_airtime_us(self, size_bytes: int, rate_bps: int | None = None) -> int:
        return math.ceil(size_bytes * 8 * 1_000_000 / (rate_bps or self.bandwidth_bps))

    def frame_airtime_us(self, size_bytes: int) -> int:
        """PLCP preamble/header plus network and MAC headers at the data rate."""
        body = size_bytes + self.net_header_bytes + self.mac_header_bytes
        return self.phy_header_us + self.payload_airtime_us(body)

    def broadcast_us(self, size_bytes: int) -> int:
        body = size_bytes + self.net_header_bytes + self.mac_header_bytes
        return self.phy_header_us + self.payload_airtime_us(body, self.basic_rate_bps)

    def ack_us(self) -> int:
        return self.phy_header_us + self.payload_airtime_us(self.ack_bytes, self.basic_rate_bps)

    def exchange_us(self, size_bytes: int) -> int:
        """Channel time of DATA + SIFS + ACK."""
        return self.frame_airtime_us(size_bytes) + self.sifs_us + self.ack_us()

    def cw_init(self, mac_priority: int | None) -> int:
        if mac_priority is None:
            return self.cw_min
        return min(self.cw_min << mac_priority, self.cw_max)


@dataclass(slots=True)
class Frame:
    payload: Any
    src: int
    dst: int
    size_bytes: int = 32
    mac_priority: int | None = None
    control: bool = False
    enq_at: int = 0
    ready_at: int = -1
    attempts: int = 0
    cw: int = 0

    def __post_init__(self) -> None:
        if self.size_bytes <= 0:
            raise ValueError("frame size must be positive")
        if self.mac_priority is not None and self.mac_priority not in (0, 1, 2):
            raise ValueError(f"mac_priority {self.mac_priority} not in {{0, 1, 2}}")


@dataclass(slots=True)
class LinkEstimate:
    neighbor: int
    etd: float
    sample_count: int = 0


def update_etd(link: LinkEstimate, sample: float, beta: float = 0.8) -> LinkEstimate:
    """Fold one measured one-hop delay into the smoothed estimate.

    The first sample replaces the nominal initializer outright.
    """
    if not sample > 0:
        raise ValueError(f"ETD sample must be positive, got {sample}")
    if link.sample_count == 0:
        etd = float(sample)
    else:
        etd = beta * link.etd + (1.0 - beta) * sample
    return LinkEstimate(link.neighbor, etd, link.sample_count + 1)


def neighbor_table(positions: np.ndarray, radius: float) -> list[list[tuple[int, float]]]:
    """Closed-ball neighbour lists ``(id, distance)`` sorted by id, self excluded."""
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    table = []
    for i in range(len(positions)):
        row = dist[i]
        ids = np.flatnonzero(row <= radius + 1e-9)
        table.append([(int(j), float(row[j])) for j in ids if j != i])
    return table


def neighbors_of(positions: np.ndarray, node: int, radius: float) -> set[tuple[int, float]]:
    d = np.sqrt(((positions - positions[node]) ** 2).sum(axis=1))
    return {(int(j), float(d[j])) for j in np.flatnonzero(d <= radius + 1e-9) if j != node}


class MacUser(Protocol):
    def on_frame(self, node: int, frame: Frame) -> None: ...
    def on_mac_result(self, node: int, frame: Frame, delivered: bool, cause: str) -> None: ...
    def on_mac_idle(self, node: int) -> None: ...


@dataclass
class _MacState:
    current: Frame | None = None
    control: deque = field(default_factory=deque)
    backlog: deque = field(default_factory=deque)
    links: dict[int, LinkEstimate] = field(default_factory=dict)


class Radio:
    """All nodes' MAC entities sharing one medium."""

    def __init__(self, engine: Engine, positions: np.ndarray, cfg: RadioConfig,
                 user: MacUser | None = None, backend=None) -> None:
        self.engine = engine
        self.cfg = cfg
        self.positions = np.asarray(positions, dtype=float)
        self.n = len(self.positions)
        self.tx_nbrs = neighbor_table(self.positions, cfg.tx_range_m)
        self.tx_nbr_set = [{j for j, _ in row} for row in self.tx_nbrs]
        sense = neighbor_table(self.positions, cfg.interference_range_m)
        self.medium = Medium([[j for j, _ in row] for row in sense], cfg.slot_us,
                             cfg.difs_us, backend=backend)
        self.macs = [_MacState() for _ in range(self.n)]
        self.user = user
        self.nominal_etd = cfg.exchange_us(cfg.data_bytes)
        self._wake = None
        self._wake_at = INF
        self.on_tx: Callable[[int, Frame, int], None] | None = None
        self.tx_count = 0
        self.collisions = 0

    # link estimates ------------------------------------------------------

    def link(self, node: int, nbr: int) -> LinkEstimate:
        links = self.macs[node].links
        est = links.get(nbr)
        if est is None:
            est = links[nbr] = LinkEstimate(nbr, float(self.nominal_etd))
        return est

    def etd(self, node: int, nbr: int) -> float:
        return self.link(node, nbr).etd

    # sending -------------------------------------------------------------

    def busy(self, node: int) -> bool:
        return self.macs[node].current is not None

    def send(self, frame: Frame) -> bool:
        """Hand a frame to the source node's MAC.

        Returns False when the frame is refused: unicast to a node out of
        range (reported through ``on_mac_result`` as a no-link drop) or a
        full service buffer.
        """
        node = frame.src
        if frame.dst != BROADCAST and frame.dst not in self.tx_nbr_set[node]:
            self.user.on_mac_result(node, frame, False, "no-link")
            return False
        frame.enq_at = self.engine.now
        if frame.ready_at < 0 or frame.ready_at > frame.enq_at:
            frame.ready_at = frame.enq_at
        mac = self.macs[node]
        if mac.current is None:
            self._start(node, frame)
            return True
        if frame.control:
            mac.control.append(frame)
            return True
        if len(mac.backlog) >= self.cfg.mac_buffer:
            self.user.on_mac_result(node, frame, False, "mac-buffer")
            return False
        mac.backlog.append(frame)
        return True

    def _start(self, node: int, frame: Frame) -> None:
        self.macs[node].current = frame
        frame.cw = self.cfg.cw_init(frame.mac_priority)
        frame.attempts = 0
        self._contend(node, frame)

    def _contend(self, node: int, frame: Frame) -> None:
        slots = self.engine.rng_below(frame.cw)
        self.medium.backoff(self.engine.now, node, slots)
        self._kick()

    def _kick(self) -> None:
        t = self.medium.next_expiry()
        if t >= self._wake_at:
            return
        if self._wake is not None:
            self.engine.cancel(self._wake)
        self._wake_at = t
        self._wake = self.engine.at(t, self._on_wake, kind=EventKind.MAC)

    def _on_wake(self, ev) -> None:
        self._wake = None
        self._wake_at = INF
        now = self.engine.now
        for node in self.medium.due(now):
            self._transmit(node, now)
        self._kick()

    def _transmit(self, node: int, now: int) -> None:
        frame = self.macs[node].current
        cfg = self.cfg
        if frame.dst == BROADCAST:
            duration = cfg.broadcast_us(frame.size_bytes)
        else:
            duration = cfg.exchange_us(frame.size_bytes)
        token = self.medium.begin(now, node, frame.dst)
        frame.attempts += 1
        self.tx_count += 1
        self.engine.at(now + duration, self._on_tx_end, kind=EventKind.FRAME,
                       target=node, payload=token)

    def _on_tx_end(self, ev) -> None:
        node = ev.target
        now = self.engine.now
        self.medium.end(now, node)
        mac = self.macs[node]
        frame = mac.current
        if frame.dst == BROADCAST:
            mac.current = None
            for j, _ in self.tx_nbrs[node]:
                self.user.on_frame(j, frame)
            self._next(node)
        elif self.medium.received(frame.dst, ev.payload):
            mac.current = None
            links = mac.links
            est = self.link(node, frame.dst)
            links[frame.dst] = update_etd(est, now - frame.ready_at, self.cfg.etd_beta)
            self.user.on_mac_result(node, frame, True, "")
            self.user.on_frame(frame.dst, frame)
            self._next(node)
        else:
            self.collisions += 1
            if frame.attempts >= self.cfg.retry_limit:
                mac.current = None
                self.user.on_mac_result(node, frame, False, "mac")
                self._next(node)
            else:
                frame.cw = min(frame.cw * 2, self.cfg.cw_max)
                self._contend(node, frame)
        self._kick()

    def _next(self, node: int) -> None:
        mac = self.macs[node]
        if mac.current is not None:
            return
        if mac.control:
            self._start(node, mac.control.popleft())
        elif mac.backlog:
            self._start(node, mac.backlog.popleft())
        else:
            self.user.on_mac_idle(node)

    # introspection -------------------------------------------------------

    def channel_idle(self, node: int) -> bool:
        return bool(self.medium.idle(node))

    def idle_since(self, node: int) -> int:
        return int(self.medium.idle_since[node])

    def queued(self, node: int) -> int:
        mac = self.macs[node]
        return len(mac.backlog) + len(mac.control) + (mac.current is not None)
