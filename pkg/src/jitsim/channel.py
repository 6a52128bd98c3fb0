"""Shared radio medium state with a selectable kernel backend.

The compiled ``_channel`` extension is used when it imports; otherwise the
numpy implementation in ``_channel_py`` is. ``JITSIM_PURE_PYTHON=1`` forces
the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _channel_py

INF = _channel_py.INF


def _load_kernel():
    if os.environ.get("JITSIM_PURE_PYTHON", "") not in ("", "0"):
        return _channel_py, "python"
    try:
        from . import _channel  # type: ignore[attr-defined]
    except ImportError:
        return _channel_py, "python"
    return _channel, "cython"


kernel, BACKEND = _load_kernel()


def csr(neighbor_lists: list[list[int]]) -> tuple[np.ndarray, np.ndarray]:
    ptr = np.zeros(len(neighbor_lists) + 1, dtype=np.int64)
    for i, lst in enumerate(neighbor_lists):
        ptr[i + 1] = ptr[i] + len(lst)
    flat = [n for lst in neighbor_lists for n in lst]
    return ptr, np.asarray(flat, dtype=np.int64)


class Medium:
    """Carrier-sense, interference and backoff-countdown state for one run."""

    def __init__(self, sense_lists: list[list[int]], slot_us: int, difs_us: int,
                 backend=None) -> None:
        self.k = backend if backend is not None else kernel
        n = len(sense_lists)
        self.n = n
        self.ptr, self.idx = csr(sense_lists)
        self.slot = slot_us
        self.difs = difs_us
        z = lambda: np.zeros(n, dtype=np.int64)  # noqa: E731
        self.busy = z()
        self.txing = z()
        self.overlap = z()
        self.busy_since = z()
        self.idle_since = z()
        self.bo_slots = np.full(n, -1, dtype=np.int64)
        self.bo_resume = np.full(n, -1, dtype=np.int64)
        self.expiry = np.full(n, INF, dtype=np.int64)

    def begin(self, now: int, sender: int, dst: int = -1) -> int:
        """Start a transmission; returns the receiver's overlap token or -1."""
        return self.k.tx_begin(now, sender, dst, self.ptr, self.idx, self.busy,
                               self.txing, self.overlap, self.busy_since,
                               self.bo_slots, self.bo_resume, self.expiry, self.slot)

    def end(self, now: int, sender: int) -> None:
        self.k.tx_end(now, sender, self.ptr, self.idx, self.busy, self.txing,
                      self.idle_since, self.bo_slots, self.bo_resume, self.expiry,
                      self.difs, self.slot)

    def received(self, dst: int, token: int) -> bool:
        return token >= 0 and int(self.overlap[dst]) == token

    def backoff(self, now: int, node: int, slots: int) -> int:
        return self.k.start_backoff(now, node, slots, self.busy, self.txing,
                                    self.idle_since, self.bo_slots, self.bo_resume,
                                    self.expiry, self.difs, self.slot)

    def cancel_backoff(self, node: int) -> None:
        self.bo_slots[node] = -1
        self.bo_resume[node] = -1
        self.expiry[node] = INF

    def next_expiry(self) -> int:
        return self.k.next_expiry(self.expiry)

    def due(self, now: int) -> list[int]:
        return self.k.due_nodes(now, self.expiry)

    def idle(self, node: int) -> bool:
        return self.busy[node] == 0 and self.txing[node] == 0
