import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jitsim.routing import DistanceInfo
from jitsim.rtsched import (
    FIFO, JITS_D, JITS_NL, JITS_S, VMS_S, FifoQueue, JitsQueue, Packet, QueuedPacket,
    SchedulerConfig, VmsQueues, target_delay, vms_priority, vms_velocity,
)

SEC = 1_000_000


def pkt(deadline=SEC, created=0, pid=0):
    return Packet(pid, 1, 0, created, deadline)


def hops(h, src=None):
    return DistanceInfo(float(src if src is not None else h), 1.0, float(h))


# target delay formulas, checked against hand evaluation ---------------------------

def test_dynamic_example():
    assert target_delay(JITS_D, pkt(), hops(4), 50_000, now=0) == 140_000


def test_dynamic_uses_remaining_slack():
    # 0.4 s already spent: (0.6 s - 4 * 50 ms) * 0.7 / 4
    assert target_delay(JITS_D, pkt(), hops(4), 50_000, now=400_000) == 70_000


def test_nonlinear_example():
    assert target_delay(JITS_NL, pkt(), hops(3), 200_000 / 3, now=0) == 70_000


def test_static_uses_source_distance_and_full_deadline():
    # computed as at the source whatever the forwarder's clock says
    got = target_delay(JITS_S, pkt(), hops(2, src=4), 50_000, now=300_000)
    assert got == 140_000


def test_gf_per_meter_share():
    # 600 m to go, 200 m progress: a third of (slack - EETD) times alpha
    d = DistanceInfo(600.0, 200.0, 600.0)
    assert target_delay(JITS_D, pkt(), d, 10_000, now=0) == round((SEC - 30_000) * 0.7 / 3)


def test_negative_budget_clamps_to_zero():
    assert target_delay(JITS_D, pkt(), hops(4), 300_000, now=0) == 0
    assert target_delay(JITS_D, pkt(), hops(1), 1_000, now=2 * SEC) == 0


def test_non_jits_policies_do_not_delay():
    for pol in (FIFO, VMS_S):
        assert target_delay(pol, pkt(), hops(3), 1_000, now=0) == 0


@given(st.integers(1, 10), st.integers(1, 10**6), st.integers(1, 5 * SEC),
       st.integers(0, 2 * SEC))
def test_dynamic_monotone_in_slack(h, etd, deadline, extra):
    a = target_delay(JITS_D, pkt(deadline), hops(h), etd, now=0)
    b = target_delay(JITS_D, pkt(deadline + extra), hops(h), etd, now=0)
    assert 0 <= a <= b


@given(st.integers(1, 12), st.integers(SEC // 10, 10 * SEC))
def test_nonlinear_halves_per_extra_hop(h, budget):
    # with EETD held fixed, one more remaining hop halves the allocation
    near = DistanceInfo(1.0, 1.0, float(h))
    far = DistanceInfo(1.0, 1.0, float(h + 1))
    a = target_delay(JITS_NL, pkt(budget), near, 1_000, now=0)
    b = target_delay(JITS_NL, pkt(budget), far, 1_000, now=0)
    assert abs(a - 2 * b) <= 1


def test_nonlinear_front_loads_toward_sink():
    d = [target_delay(JITS_NL, pkt(), hops(h), 1_000, now=0) for h in (1, 2, 3, 4)]
    assert d == sorted(d, reverse=True)


# the JiTS queue ----------------------------------------------------------------------

def qp(pid, target, enq=0):
    return QueuedPacket(pkt(pid=pid), target, enq, 1)


@settings(max_examples=300)
@given(st.lists(st.integers(0, 1000), max_size=80))
def test_dispatch_order_matches_sort(targets):
    q = JitsQueue(10_000)
    for i, t in enumerate(targets):
        assert q.push(qp(i, t)) is None
    order = [q.pop().packet.id for _ in targets]
    assert order == [i for _, i in sorted((t, i) for i, t in enumerate(targets))]


@settings(max_examples=300)
@given(st.integers(1, 10), st.lists(st.tuples(st.booleans(), st.integers(0, 100)), max_size=80))
def test_queue_full_forwards_head_and_never_drops(cap, ops):
    q = JitsQueue(cap)
    pushed, out = [], []
    for i, (is_push, t) in enumerate(ops):
        if is_push or not len(q):
            head = q.head()
            full = len(q) == cap
            ev = q.push(qp(i, t))
            pushed.append(i)
            if full:
                assert ev is head
                out.append(ev.packet.id)
            else:
                assert ev is None
        else:
            out.append(q.pop().packet.id)
        assert len(q) <= cap
    out.extend(q.pop().packet.id for _ in range(len(q)))
    assert sorted(out) == pushed
    assert q.enqueued == len(pushed) and q.dispatched == len(pushed)


def test_target_before_enqueue_rejected():
    with pytest.raises(ValueError):
        JitsQueue(4).push(qp(0, 5, enq=10))


def test_occupancy_counter():
    q = JitsQueue(3)
    for i in range(5):
        q.push(qp(i, i))
    assert q.max_occupancy == 3 and len(q) == 3


# VMS ---------------------------------------------------------------------------------

def test_velocity_and_classes():
    assert vms_velocity(1000.0, SEC) == 1000.0
    assert vms_velocity(10.0, 0) == float("inf")
    assert vms_priority(1400.0, SEC // 2) == 0      # 2800 m/s
    assert vms_priority(1000.0, SEC) == 1           # 1000 m/s
    assert vms_priority(200.0, SEC) == 2            # 200 m/s
    assert vms_priority(500.0, SEC) == 1            # thresholds are inclusive
    assert vms_priority(1500.0, SEC) == 0


def test_vms_serves_by_class_then_fifo():
    q = VmsQueues(9)
    for i, cls in enumerate([2, 1, 2, 0, 1]):
        assert q.push(qp(i, 0), cls)
    assert [q.pop().packet.id for _ in range(5)] == [3, 1, 4, 0, 2]
    assert q.pop() is None


def test_vms_per_class_capacity_drops_arrivals():
    q = VmsQueues(6)
    assert q.push(qp(0, 0), 1) and q.push(qp(1, 0), 1)
    assert not q.push(qp(2, 0), 1)
    assert q.push(qp(3, 0), 0)


def test_vms_low_class_starves_under_steady_urgent_arrivals():
    q = VmsQueues(30)
    q.push(qp(0, 0), 2)
    served = []
    for i in range(1, 50):
        q.push(qp(i, 0), 0)
        served.append(q.pop().packet.id)
    assert 0 not in served


def test_fifo_queue():
    q = FifoQueue(2)
    assert q.push(qp(0, 0)) and q.push(qp(1, 0)) and not q.push(qp(2, 0))
    assert [q.pop().packet.id, q.pop().packet.id, q.pop()] == [0, 1, None]


@pytest.mark.parametrize("kw", [dict(policy="edf"), dict(alpha=0.0), dict(alpha=1.5),
                                dict(queue_capacity=0), dict(vms_t1_mps=2000.0)])
def test_scheduler_config_invariants(kw):
    with pytest.raises(ValueError):
        SchedulerConfig(**kw)


def test_packet_deadline():
    p = Packet(1, 2, 0, created_at=5, deadline_rel=10)
    assert p.deadline_abs == 15
    with pytest.raises(ValueError):
        Packet(1, 2, 0, 0, 0)
