"""Pure-Python (numpy) shared-medium kernels.

Per-node int64 state arrays:

``busy``        active transmitters within sensing range, excluding self
``txing``       1 while the node itself transmits
``overlap``     bumped whenever a reception at the node is spoiled by overlap
``busy_since``  time ``busy`` last rose from zero
``idle_since``  time the medium last went idle at the node
``bo_slots``    remaining backoff slots, -1 when not contending
``bo_resume``   time the slot countdown (re)starts, -1 while frozen
``expiry``      countdown end time, ``INF`` while frozen or idle

A node whose countdown would end less than one slot after a neighbour
starts transmitting cannot sense that start in time, so it is not frozen
and goes on to collide.
"""

from __future__ import annotations

import numpy as np

INF = 1 << 62


def tx_begin(now, s, dst, ptr, idx, busy, txing, overlap, busy_since,
             bo_slots, bo_resume, expiry, slot):
    clean = dst >= 0 and busy[dst] == 0 and txing[dst] == 0
    txing[s] = 1
    overlap[s] += 1
    bo_slots[s] = -1
    bo_resume[s] = -1
    expiry[s] = INF
    nb = idx[ptr[s]:ptr[s + 1]]
    b = busy[nb]
    t = txing[nb]
    overlap[nb[(b > 0) | (t != 0)]] += 1
    busy[nb] = b + 1
    fresh = nb[(b == 0) & (t == 0)]
    if fresh.size:
        busy_since[fresh] = now
        ex = expiry[fresh]
        frz = fresh[(bo_slots[fresh] >= 0) & (ex != INF) & (ex - now >= slot)]
        if frz.size:
            res = bo_resume[frz]
            counted = now > res
            used = np.where(counted, (now - res) // slot, 0)
            bo_slots[frz] = np.maximum(bo_slots[frz] - used, 0)
            bo_resume[frz] = -1
            expiry[frz] = INF
    return int(overlap[dst]) if clean else -1


def tx_end(now, s, ptr, idx, busy, txing, idle_since, bo_slots, bo_resume,
           expiry, difs, slot):
    txing[s] = 0
    if busy[s] == 0:
        idle_since[s] = now
    nb = idx[ptr[s]:ptr[s + 1]]
    busy[nb] -= 1
    quiet = nb[(busy[nb] == 0) & (txing[nb] == 0)]
    if quiet.size:
        idle_since[quiet] = now
        wake = quiet[(bo_slots[quiet] >= 0) & (expiry[quiet] == INF)]
        if wake.size:
            bo_resume[wake] = now + difs
            expiry[wake] = now + difs + bo_slots[wake] * slot


def start_backoff(now, n, slots, busy, txing, idle_since, bo_slots,
                  bo_resume, expiry, difs, slot):
    bo_slots[n] = slots
    if busy[n] == 0 and txing[n] == 0:
        resume = max(now, int(idle_since[n]) + difs)
        bo_resume[n] = resume
        expiry[n] = resume + slots * slot
    else:
        bo_resume[n] = -1
        expiry[n] = INF
    return int(expiry[n])


def next_expiry(expiry):
    return int(expiry.min())


def due_nodes(now, expiry):
    return np.flatnonzero(expiry <= now).tolist()
