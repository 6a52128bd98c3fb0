import pytest

from jitsim import _channel_py

try:
    from jitsim import _channel as _compiled
except ImportError:  # pragma: no cover
    _compiled = None
from jitsim.config import SimConfig
from jitsim.network import Simulation, simulate

SMALL = dict(node_count=25, area_side_m=600.0, sim_time_s=8.0, drain_s=4.0, rate_pps=1.0)


def _rows(cfg, backend=None):
    return simulate(cfg, backend=backend).rows()


@pytest.mark.parametrize("policy,routing", [
    ("jits_s", "sp"), ("jits_d", "gf"), ("jits_nl", "sp"), ("vms_s", "gf"),
    ("vms_d", "sp"), ("fifo", "gf"), ("fifo", "speed"),
])
def test_every_protocol_conserves_packets(policy, routing):
    res = simulate(SimConfig(policy=policy, routing=routing, **SMALL))
    m = res.total
    assert m.generated == 25 * 8
    assert m.on_time + m.late + m.dropped == m.generated
    assert m.drop_ratio <= m.miss_ratio
    assert m.delivered > 0


def test_jits_never_drops_in_its_queue():
    res = simulate(SimConfig(policy="jits_d", routing="sp", **SMALL))
    assert res.total.dropped_in("routing") == 0
    assert res.jits_enqueued == res.jits_dispatched
    assert res.stats["jits_queued_at_end"] == 0


def test_jits_delays_more_than_fifo_but_stays_in_budget():
    cfg = dict(SMALL, deadline_s=2.0)
    jits = simulate(SimConfig(policy="jits_d", routing="sp", **cfg)).total
    fifo = simulate(SimConfig(policy="fifo", routing="sp", **cfg)).total
    assert jits.avg_delay_us > fifo.avg_delay_us
    assert jits.avg_delay_us < 2_000_000


def test_replay_is_exact():
    cfg = SimConfig(policy="vms_s", routing="gf", **SMALL)
    assert _rows(cfg) == _rows(cfg)
    other = SimConfig(policy="vms_s", routing="gf", seed=2, **SMALL)
    assert _rows(other) != _rows(cfg)


@pytest.mark.skipif(_compiled is None, reason="compiled kernel not built")
def test_backends_agree():
    cfg = SimConfig(policy="jits_d", routing="gf", **SMALL)
    assert _rows(cfg, _compiled) == _rows(cfg, _channel_py)


def test_two_level_rows():
    res = simulate(SimConfig(policy="jits_d", routing="gf", traffic="two_level",
                             deadline_s=1.0, **SMALL))
    assert [r["level"] for r in res.rows()] == [0, 1, 2]
    total, l1, l2 = res.metrics
    assert l1.generated + l2.generated == total.generated


def test_speed_variants_run():
    for variant in ("speed", "speed_t", "speed_s"):
        cfg = SimConfig(policy="fifo", routing="speed", speed_variant=variant, **SMALL)
        row = _rows(cfg)[0]
        assert row["routing"] == variant
        assert int(row["generated"]) == 200


def test_flood_builds_min_hop_routes():
    sim = Simulation(SimConfig(routing="sp", **SMALL))
    sim.engine.at(0, sim._flood)
    sim.engine.run_until(1_000_000)
    corner = 24  # (600, 600) on a 150 m lattice, sink at the origin
    assert sim.sp_table.hops(corner) == 4
