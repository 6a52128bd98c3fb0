"""One simulation run: nodes, routing, schedulers, traffic and accounting."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field

import numpy as np

from . import routing as rt
from . import speed as sp
from .config import SimConfig
from .engine import Engine, EventKind, seconds
from .metrics import Recorder, RunMetrics
from .radio import BROADCAST, Frame, Radio
from .routing import Advert, RoutingDrop, SpTable
from .rtsched import (
    JITS_POLICIES, JITS_S, VMS_D, VMS_S, FifoQueue, JitsQueue, Packet, QueuedPacket,
    VmsQueues, target_delay, vms_priority,
)
from .scenarios import (
    CONGESTION, TWO_LEVEL, Topology, build_topology, congestion_sources, emission_schedule,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class Beacon:
    sender: int


@dataclass
class NodeStats:
    queue_delay_sum: int = 0
    dispatched: int = 0
    forced: int = 0
    early_idle: int = 0


@dataclass
class RunResult:
    config: SimConfig
    metrics: list[RunMetrics]
    events: int
    tx_count: int
    collisions: int
    jits_enqueued: int = 0
    jits_dispatched: int = 0
    jits_max_occupancy: int = 0
    stats: dict = field(default_factory=dict)

    @property
    def total(self) -> RunMetrics:
        return self.metrics[0]

    def rows(self) -> list[dict[str, object]]:
        c = self.config
        return [m.row(c.scenario_label, c.policy_label, c.routing_label, c.deadline_s, c.seed)
                for m in self.metrics]


class Simulation:
    def __init__(self, cfg: SimConfig, topology: Topology | None = None,
                 backend=None) -> None:
        self.cfg = cfg
        self.topo = topology or build_topology(cfg.topology, cfg.node_count,
                                               cfg.area_side_m, cfg.topo_seed)
        self.engine = Engine(cfg.seed)
        self.radio_cfg = cfg.radio_config()
        self.sched_cfg = cfg.scheduler_config()
        self.speed_cfg = cfg.speed_config()
        self.traffic = cfg.traffic_spec()
        self.positions = self.topo.positions
        self.sink = self.topo.sink
        self.n = len(self.positions)
        self.radio = Radio(self.engine, self.positions, self.radio_cfg, user=self,
                           backend=backend)
        self.nbr_ids = [[j for j, _ in row] for row in self.radio.tx_nbrs]
        self.sp_table = SpTable(self.n, self.sink)
        self.speed_tables = sp.SpeedTables(self.n)
        self.recorder = Recorder()
        self.policy = self.sched_cfg.policy
        self.mode = cfg.routing
        self.stats = [NodeStats() for _ in range(self.n)]
        cap = self.sched_cfg.queue_capacity
        if self.policy in JITS_POLICIES:
            self.queues = [JitsQueue(cap) for _ in range(self.n)]
        elif self.policy in (VMS_S, VMS_D):
            self.queues = [VmsQueues(cap) for _ in range(self.n)]
        else:
            self.queues = [FifoQueue(cap) for _ in range(self.n)]
        self.timers: list = [None] * self.n
        self.timer_at = [-1] * self.n
        self._gf_cache: dict[int, int | str] = {}
        self.sink_dist = np.sqrt(((self.positions - self.positions[self.sink]) ** 2).sum(axis=1))
        self.idle_threshold = 2 * self.radio.nominal_etd
        self._next_id = 0
        self._emissions = []
        self._emit_idx = 0

    # packet entry points -------------------------------------------------

    def inject(self, source: int, deadline_us: int, level: int = 0) -> Packet:
        """Create a packet at ``source`` now and hand it to its network layer."""
        now = self.engine.now
        pkt = Packet(self._next_id, source, self.sink, now, deadline_us, level)
        self._next_id += 1
        if self.mode == "sp":
            entry = self.sp_table.entries[source]
            pkt.src_metric = entry.metric if entry is not None else 0.0
        else:
            pkt.src_metric = float(self.sink_dist[source])
        if self.policy == VMS_S:
            pkt.vms_class = vms_priority(self.sink_dist[source], deadline_us,
                                         self.sched_cfg.vms_t1_mps, self.sched_cfg.vms_t2_mps)
        self.recorder.generate(pkt)
        self.handle(source, pkt)
        return pkt

    def handle(self, node: int, pkt: Packet) -> None:
        now = self.engine.now
        if node == self.sink:
            self.recorder.record_delivery(pkt, now)
            return
        pkt.hop_times.append(now)
        try:
            nxt = self.next_hop(node)
        except RoutingDrop as drop:
            self.recorder.record_drop(pkt, drop.cause)
            return
        policy = self.policy
        if policy in JITS_POLICIES:
            dist = self.distance_info(node, nxt, pkt)
            delay = target_delay(policy, pkt, dist, self.radio.etd(node, nxt), now,
                                 self.sched_cfg.alpha)
            qp = QueuedPacket(pkt, now + delay, now, nxt)
            evicted = self.queues[node].push(qp)
            if evicted is not None:
                self.stats[node].forced += 1
                self._send(node, evicted)
            self.service(node)
            return
        qp = QueuedPacket(pkt, now, now, nxt)
        if policy in (VMS_S, VMS_D):
            if policy == VMS_D:
                pkt.vms_class = vms_priority(self.sink_dist[node], pkt.deadline_abs - now,
                                             self.sched_cfg.vms_t1_mps,
                                             self.sched_cfg.vms_t2_mps)
            ok = self.queues[node].push(qp, pkt.vms_class)
            cause = "vms-overflow"
        else:
            ok = self.queues[node].push(qp)
            cause = "queue-overflow"
        if not ok:
            self.recorder.record_drop(pkt, cause)
            return
        self.service(node)

    # routing -------------------------------------------------------------

    def next_hop(self, node: int) -> int:
        if self.mode == "sp":
            return self.sp_table.route(node).next_hop
        if self.mode == "gf":
            hit = self._gf_cache.get(node)
            if hit is None:
                try:
                    hit = rt.gf_next_hop(node, self.positions, self.nbr_ids[node], self.sink)
                except RoutingDrop as drop:
                    hit = drop.cause
                self._gf_cache[node] = hit
            if isinstance(hit, str):
                raise RoutingDrop(hit)
            return hit
        table = self.speed_tables[node]
        if self.sink in table:
            return self.sink
        fs = sp.forwarding_set(node, table, self.positions, self.sink,
                               lambda j: self.radio.etd(node, j))
        variant = self.speed_cfg.variant
        if variant == sp.SPEED_T:
            return sp.speed_t_select(fs)
        if variant == sp.SPEED_S:
            return sp.speed_s_select(fs)
        return sp.sngf_select(fs, self.speed_cfg.setpoint_mps, self.engine.rng_unit)

    def distance_info(self, node: int, nxt: int, pkt: Packet) -> rt.DistanceInfo:
        at_source = self.policy == JITS_S
        if self.mode == "sp":
            return rt.sp_distance(self.sp_table, node,
                                  int(pkt.src_metric) if at_source else None)
        return rt.gf_distance(node, nxt, self.positions, self.sink,
                              pkt.src_metric if at_source else None,
                              self.radio_cfg.tx_range_m, self.cfg.gf_one_hop)

    # dispatch ------------------------------------------------------------

    def service(self, node: int) -> None:
        """Hand the next eligible packet to an idle MAC, or arm the timer."""
        if self.radio.busy(node):
            return
        q = self.queues[node]
        if self.policy not in JITS_POLICIES:
            qp = q.pop()
            if qp is not None:
                self._send(node, qp)
            return
        head = q.head()
        if head is None:
            self._disarm(node)
            return
        now = self.engine.now
        due = head.target_tx_at
        if self.sched_cfg.idle_detection and due > now and self.radio.channel_idle(node):
            quiet_until = max(self.radio.idle_since(node), head.enqueued_at) + self.idle_threshold
            if quiet_until <= now:
                self.stats[node].early_idle += 1
                due = now
            else:
                due = min(due, quiet_until)
        if due <= now:
            self._disarm(node)
            self._send(node, q.pop())
        else:
            self._arm(node, due)

    def _arm(self, node: int, t: int) -> None:
        if self.timer_at[node] == t and self.timers[node] is not None:
            return
        self.engine.cancel(self.timers[node])
        self.timer_at[node] = t
        self.timers[node] = self.engine.at(t, self._on_timer, kind=EventKind.TIMER,
                                           target=node)

    def _disarm(self, node: int) -> None:
        if self.timers[node] is not None:
            self.engine.cancel(self.timers[node])
            self.timers[node] = None
            self.timer_at[node] = -1

    def _on_timer(self, ev) -> None:
        node = ev.target
        self.timers[node] = None
        self.timer_at[node] = -1
        self.service(node)

    def _send(self, node: int, qp: QueuedPacket) -> None:
        st = self.stats[node]
        st.dispatched += 1
        st.queue_delay_sum += self.engine.now - qp.enqueued_at
        pkt = qp.packet
        prio = pkt.vms_class if self.policy in (VMS_S, VMS_D) else None
        frame = Frame(pkt, node, qp.next_hop, self.radio_cfg.data_bytes, prio)
        # one-hop delay is measured from release by the scheduler, so waiting
        # behind a busy MAC counts as lower-layer delay
        frame.ready_at = min(self.engine.now, max(qp.enqueued_at, qp.target_tx_at))
        self.radio.send(frame)

    # MAC callbacks -------------------------------------------------------

    def on_frame(self, node: int, frame: Frame) -> None:
        payload = frame.payload
        if frame.control:
            if isinstance(payload, Advert):
                fwd = self.sp_table.hear(node, frame.src, payload)
                if fwd is not None:
                    self._broadcast(node, fwd)
            elif isinstance(payload, Beacon):
                self.speed_tables.hear_beacon(node, payload.sender)
            return
        payload.hops_traveled += 1
        self.handle(node, payload)

    def on_mac_result(self, node: int, frame: Frame, delivered: bool, cause: str) -> None:
        if not delivered and not frame.control:
            self.recorder.record_drop(frame.payload, cause)

    def on_mac_idle(self, node: int) -> None:
        self.service(node)

    # control plane -------------------------------------------------------

    def _broadcast(self, node: int, payload) -> None:
        self.radio.send(Frame(payload, node, BROADCAST, self.radio_cfg.control_bytes,
                              control=True))

    def _flood(self, ev) -> None:
        self._broadcast(self.sink, self.sp_table.new_advert())
        self.engine.after(seconds(self.cfg.routing_period_s), self._flood,
                          kind=EventKind.FLOOD, target=self.sink)

    def _beacon(self, ev) -> None:
        node = ev.target
        self._broadcast(node, Beacon(node))
        self.engine.after(seconds(self.speed_cfg.beacon_period_s), self._beacon,
                          kind=EventKind.BEACON, target=node)

    # traffic -------------------------------------------------------------

    def _emit(self, ev) -> None:
        ems = self._emissions
        i = self._emit_idx
        now = self.engine.now
        while i < len(ems) and ems[i].at == now:
            e = ems[i]
            self.inject(e.source, e.deadline_us, e.level)
            i += 1
        self._emit_idx = i
        if i < len(ems):
            self.engine.at(ems[i].at, self._emit, kind=EventKind.TRAFFIC)

    def setup(self) -> None:
        eng = self.engine
        eng.at(0, self._flood, kind=EventKind.FLOOD, target=self.sink)
        if self.mode == "speed":
            period = seconds(self.speed_cfg.beacon_period_s)
            for node in range(self.n):
                eng.at(eng.rng_below(period), self._beacon, kind=EventKind.BEACON,
                       target=node)
        cong = None
        if self.traffic.pattern == CONGESTION and self.traffic.congestion_flow_count > 0:
            cong = congestion_sources(self.topo, self.traffic.congestion_flow_count,
                                      random.Random(self.cfg.congestion_seed))
        self._emissions = emission_schedule(
            self.traffic, self.topo.sensors, seconds(self.cfg.warmup_s),
            seconds(self.cfg.sim_time_s), eng.rng, cong)
        if self._emissions:
            eng.at(self._emissions[0].at, self._emit, kind=EventKind.TRAFFIC)

    def run(self) -> RunResult:
        self.setup()
        cfg = self.cfg
        end = seconds(cfg.warmup_s + cfg.sim_time_s + cfg.drain_s)
        summary = self.engine.run_until(end)
        self.recorder.drain()
        metrics = self.recorder.finalize(per_level=self.traffic.pattern == TWO_LEVEL)
        res = RunResult(cfg, metrics, summary.processed, self.radio.tx_count,
                        self.radio.collisions)
        if self.policy in JITS_POLICIES:
            res.jits_enqueued = sum(q.enqueued for q in self.queues)
            res.jits_dispatched = sum(q.dispatched for q in self.queues)
            res.jits_max_occupancy = max(q.max_occupancy for q in self.queues)
            res.stats["jits_queued_at_end"] = sum(len(q) for q in self.queues)
        res.stats["forced"] = sum(s.forced for s in self.stats)
        res.stats["early_idle"] = sum(s.early_idle for s in self.stats)
        disp = sum(s.dispatched for s in self.stats)
        res.stats["avg_queue_delay_ms"] = (
            sum(s.queue_delay_sum for s in self.stats) / disp / 1000 if disp else 0.0)
        return res


def simulate(cfg: SimConfig, backend=None) -> RunResult:
    return Simulation(cfg, backend=backend).run()
