import numpy as np
import pytest

from jitsim.engine import Engine
from jitsim.radio import (
    BROADCAST, Frame, LinkEstimate, Radio, RadioConfig, neighbor_table, neighbors_of, update_etd,
)


class Recorder:
    def __init__(self):
        self.frames, self.results, self.idle = [], [], []

    def on_frame(self, node, frame):
        self.frames.append((node, frame))

    def on_mac_result(self, node, frame, delivered, cause):
        self.results.append((node, frame.payload, delivered, cause))

    def on_mac_idle(self, node):
        self.idle.append(node)


def make(positions, seed=1, **cfg):
    eng = Engine(seed)
    user = Recorder()
    radio = Radio(eng, np.array(positions, dtype=float), RadioConfig(**cfg), user=user)
    return eng, radio, user


# configuration ---------------------------------------------------------------

def test_payload_airtime():
    cfg = RadioConfig()
    assert cfg.payload_airtime_us(32) == 128


def test_exchange_components():
    cfg = RadioConfig()
    assert cfg.frame_airtime_us(32) == 192 + (32 + 20 + 28) * 8 // 2
    assert cfg.ack_us() == 192 + 14 * 8
    assert cfg.exchange_us(32) == cfg.frame_airtime_us(32) + 10 + cfg.ack_us()


@pytest.mark.parametrize("kw", [
    dict(interference_range_m=100.0), dict(cw_min=64, cw_max=32), dict(retry_limit=0),
    dict(etd_beta=1.0), dict(tx_range_m=0.0),
])
def test_config_invariants(kw):
    with pytest.raises(ValueError):
        RadioConfig(**kw)


def test_cw_scaling_by_priority():
    cfg = RadioConfig()
    assert [cfg.cw_init(c) for c in (None, 0, 1, 2)] == [31, 31, 62, 124]


def test_frame_priority_validated():
    with pytest.raises(ValueError):
        Frame(None, 0, 1, mac_priority=3)
    with pytest.raises(ValueError):
        Frame(None, 0, 1, size_bytes=0)


# ETD ---------------------------------------------------------------------------

def test_ewma_examples():
    assert update_etd(LinkEstimate(1, 1000.0, 3), 1000).etd == 1000
    assert update_etd(LinkEstimate(1, 1000.0, 3), 2000, 0.8).etd == pytest.approx(1200)
    first = update_etd(LinkEstimate(1, 690.0, 0), 5000)
    assert first.etd == 5000 and first.sample_count == 1
    with pytest.raises(ValueError):
        update_etd(LinkEstimate(1, 1000.0, 1), 0)


def test_ewma_stays_within_sample_hull():
    rng = np.random.default_rng(5)
    est = LinkEstimate(1, 1.0, 0)
    samples = rng.uniform(100, 5000, size=200)
    for s in samples:
        est = update_etd(est, float(s))
        assert samples[: est.sample_count].min() - 1e-9 <= est.etd
        assert est.etd <= samples[: est.sample_count].max() + 1e-9


def _drive(eng, radio, count, src=0, dst=1, gap=5000):
    for k in range(count):
        eng.at(1000 + k * gap, lambda ev, k=k: radio.send(Frame(k, src, dst)))
    eng.run_until(1000 + count * gap + 100_000)


def test_etd_converges_without_contention():
    # cw_min = 1 pins every backoff draw to zero slots
    eng, radio, user = make([(0, 0), (100, 0)], cw_min=1)
    nominal = radio.cfg.exchange_us(32)
    _drive(eng, radio, 5)
    est = radio.link(0, 1)
    assert est.sample_count == 5
    assert abs(est.etd - nominal) <= 0.01 * nominal
    assert all(d for _, _, d, _ in user.results)


def test_etd_default_cw_tracks_mean_backoff():
    eng, radio, _ = make([(0, 0), (100, 0)])
    _drive(eng, radio, 400)
    expected = radio.cfg.exchange_us(32) + 15 * radio.cfg.slot_us
    assert radio.link(0, 1).etd == pytest.approx(expected, rel=0.25)


def test_completion_not_before_min_airtime():
    eng, radio, user = make([(0, 0), (100, 0)])
    done = []
    radio.user.on_mac_result = lambda n, f, ok, c: done.append(eng.now)
    eng.at(0, lambda ev: radio.send(Frame("x", 0, 1)))
    eng.run_until(100_000)
    assert done and done[0] >= radio.cfg.exchange_us(32)


# delivery, collisions, drops ------------------------------------------------------

def test_unicast_delivery_and_idle_callback():
    eng, radio, user = make([(0, 0), (100, 0)])
    eng.at(0, lambda ev: radio.send(Frame("p", 0, 1)))
    eng.run_until(100_000)
    assert [(n, f.payload) for n, f in user.frames] == [(1, "p")]
    assert user.results == [(0, "p", True, "")]
    assert user.idle == [0]


def test_out_of_range_is_no_link():
    eng, radio, user = make([(0, 0), (400, 0)])
    assert radio.send(Frame("p", 0, 1)) is False
    assert user.results == [(0, "p", False, "no-link")]


def test_broadcast_reaches_all_neighbours():
    eng, radio, user = make([(0, 0), (100, 0), (0, 200), (600, 0)])
    eng.at(0, lambda ev: radio.send(Frame("b", 0, BROADCAST, control=True)))
    eng.run_until(100_000)
    assert sorted(n for n, _ in user.frames) == [1, 2]


def test_hidden_terminals_collide_then_exhaust_retries():
    # both ends reach the middle node but cannot sense each other, and a
    # one-slot window removes any backoff diversity
    pos = [(-240, 0), (0, 0), (240, 0)]
    eng, radio, user = make(pos, interference_range_m=250.0, cw_min=1, cw_max=1)
    eng.at(0, lambda ev: radio.send(Frame("a", 0, 1)))
    eng.at(0, lambda ev: radio.send(Frame("c", 2, 1)))
    eng.run_until(1_000_000)
    assert user.frames == []
    assert sorted(user.results) == [(0, "a", False, "mac"), (2, "c", False, "mac")]
    assert radio.collisions == 2 * radio.cfg.retry_limit


def test_overlap_corrupts_both_frames_and_both_back_off():
    pos = [(-240, 0), (0, 0), (240, 0)]
    eng, radio, user = make(pos, interference_range_m=250.0, cw_min=1)
    eng.at(0, lambda ev: radio.send(Frame("a", 0, 1)))
    eng.at(0, lambda ev: radio.send(Frame("c", 2, 1)))
    eng.run_until(radio.cfg.difs_us + radio.cfg.exchange_us(32))
    assert radio.collisions == 2 and user.frames == [] and user.results == []
    for node in (0, 2):
        frame = radio.macs[node].current
        assert frame.attempts == 1 and frame.cw == 2


def test_mac_buffer_overflow_drops():
    eng, radio, user = make([(0, 0), (100, 0)], mac_buffer=2)
    for k in range(4):
        radio.send(Frame(k, 0, 1))
    assert user.results == [(0, 3, False, "mac-buffer")]
    eng.run_until(1_000_000)
    assert sorted(p for _, p, ok, _ in user.results if ok) == [0, 1, 2]


def test_priority_zero_wins_access_more_often():
    wins = {0: 0, 2: 0}
    trials = 10_000
    for seed in range(trials):
        eng, radio, user = make([(0, 0), (100, 0), (50, 50)], seed=seed)
        radio.send(Frame("hi", 0, 1, mac_priority=0))
        radio.send(Frame("lo", 2, 1, mac_priority=2))
        first = None
        while first is None and eng.peek_time() is not None:
            eng.run_until(eng.peek_time())
            ok = [p for _, p, d, _ in user.results if d]
            if ok:
                first = ok[0]
        wins[0 if first == "hi" else 2] += 1
    assert wins[0] / trials > 0.5


# neighbour discovery ---------------------------------------------------------------

def _grid():
    return np.array([(i * 1000 / 9, j * 1000 / 9) for i in range(10) for j in range(10)])


def test_corner_neighbours_match_brute_force():
    pos = _grid()
    got = {j for j, _ in neighbors_of(pos, 0, 250.0)}
    oracle = {k for k in range(100) if k != 0 and np.hypot(*(pos[k] - pos[0])) <= 250.0}
    assert got == oracle == {1, 2, 10, 11, 12, 20, 21}


def test_closed_ball_and_isolation():
    pos = np.array([(0.0, 0.0), (250.0, 0.0), (900.0, 900.0)])
    table = neighbor_table(pos, 250.0)
    assert [j for j, _ in table[0]] == [1]
    assert table[2] == []
