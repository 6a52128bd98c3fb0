import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jitsim import _channel_py
from jitsim.channel import BACKEND, INF, Medium, csr

try:
    from jitsim import _channel as _compiled
except ImportError:  # pragma: no cover - build without a compiler
    _compiled = None

LINE = [[1], [0, 2], [1]]  # 0 - 1 - 2, ends hidden from each other


def test_csr_layout():
    ptr, idx = csr([[1, 2], [], [0]])
    assert ptr.tolist() == [0, 2, 2, 3]
    assert idx.tolist() == [1, 2, 0]


def test_backend_label():
    assert BACKEND in ("cython", "python")


def test_clean_reception_and_overlap_spoils():
    m = Medium(LINE, slot_us=20, difs_us=50, backend=_channel_py)
    tok = m.begin(0, 0, 1)
    assert tok >= 0 and m.received(1, tok)
    tok2 = m.begin(10, 2, 1)  # hidden sender hits the same receiver
    assert tok2 == -1
    assert not m.received(1, tok)
    m.end(100, 0)
    m.end(110, 2)
    assert m.idle(1) and m.idle_since[1] == 110


def test_backoff_freezes_and_resumes_after_difs():
    m = Medium([[1], [0]], slot_us=20, difs_us=50, backend=_channel_py)
    m.idle_since[:] = -1000
    assert m.backoff(0, 1, 10) == 200
    m.begin(100, 0, -1)  # 5 slots counted, frozen with 5 left
    assert m.expiry[1] == INF and m.bo_slots[1] == 5
    m.end(400, 0)
    assert m.expiry[1] == 400 + 50 + 5 * 20
    assert m.next_expiry() == 550
    assert m.due(549) == [] and m.due(550) == [1]


def test_countdown_within_one_slot_is_not_frozen():
    m = Medium([[1], [0]], slot_us=20, difs_us=50, backend=_channel_py)
    m.idle_since[:] = -1000
    m.backoff(0, 1, 3)  # expires at 60
    m.begin(45, 0, -1)  # 15 us before expiry: too late to sense
    assert m.expiry[1] == 60


def test_busy_medium_defers_backoff_start():
    m = Medium([[1], [0]], slot_us=20, difs_us=50, backend=_channel_py)
    m.begin(0, 0, -1)
    assert m.backoff(10, 1, 2) == INF
    m.end(300, 0)
    assert m.expiry[1] == 300 + 50 + 40


ops = st.lists(
    st.tuples(st.sampled_from(["begin", "end", "backoff"]), st.integers(0, 5),
              st.integers(0, 6), st.integers(0, 40)),
    min_size=1, max_size=60)


@pytest.mark.skipif(_compiled is None, reason="compiled kernel not built")
@settings(max_examples=200, deadline=None)
@given(ops)
def test_compiled_kernel_matches_fallback(seq):
    rng = np.random.default_rng(0)
    lists = [[j for j in range(6) if j != i and rng.random() < 0.5] for i in range(6)]
    lists = [[j for j in range(6) if j != i and (j in lists[i] or i in lists[j])]
             for i in range(6)]
    a = Medium(lists, 20, 50, backend=_channel_py)
    b = Medium(lists, 20, 50, backend=_compiled)
    now = 0
    for op, node, dst, dt in seq:
        now += dt
        if op == "begin" and not a.txing[node]:
            d = dst if dst < 6 and dst != node else -1
            assert a.begin(now, node, d) == b.begin(now, node, d)
        elif op == "end" and a.txing[node]:
            a.end(now, node)
            b.end(now, node)
        elif op == "backoff" and not a.txing[node]:
            assert a.backoff(now, node, dt % 8) == b.backoff(now, node, dt % 8)
        for name in ("busy", "txing", "overlap", "busy_since", "idle_since", "bo_slots",
                     "bo_resume", "expiry"):
            assert np.array_equal(getattr(a, name), getattr(b, name)), name
        assert a.next_expiry() == b.next_expiry()
        assert list(a.due(now)) == list(b.due(now))
