# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled shared-medium kernels.

Mirrors ``_channel_py`` function for function; see that module for the
state layout. Arrays are int64 and indexed by node id; sensing neighbours
are given in CSR form (``ptr``, ``idx``).
"""

from libc.stdint cimport int64_t

cdef int64_t INF = 1LL << 62


def tx_begin(int64_t now, int64_t s, int64_t dst,
             const int64_t[::1] ptr, const int64_t[::1] idx,
             int64_t[::1] busy, int64_t[::1] txing, int64_t[::1] overlap,
             int64_t[::1] busy_since, int64_t[::1] bo_slots,
             int64_t[::1] bo_resume, int64_t[::1] expiry, int64_t slot):
    cdef int64_t k, n, clean = 0
    if dst >= 0 and busy[dst] == 0 and txing[dst] == 0:
        clean = 1
    txing[s] = 1
    overlap[s] += 1
    bo_slots[s] = -1
    bo_resume[s] = -1
    expiry[s] = INF
    for k in range(ptr[s], ptr[s + 1]):
        n = idx[k]
        if busy[n] > 0 or txing[n]:
            overlap[n] += 1
        busy[n] += 1
        if busy[n] == 1 and txing[n] == 0:
            busy_since[n] = now
            if bo_slots[n] >= 0 and expiry[n] != INF and expiry[n] - now >= slot:
                if now > bo_resume[n]:
                    bo_slots[n] -= (now - bo_resume[n]) // slot
                    if bo_slots[n] < 0:
                        bo_slots[n] = 0
                bo_resume[n] = -1
                expiry[n] = INF
    if clean:
        return overlap[dst]
    return -1


def tx_end(int64_t now, int64_t s,
           const int64_t[::1] ptr, const int64_t[::1] idx,
           int64_t[::1] busy, int64_t[::1] txing, int64_t[::1] idle_since,
           int64_t[::1] bo_slots, int64_t[::1] bo_resume, int64_t[::1] expiry,
           int64_t difs, int64_t slot):
    cdef int64_t k, n
    txing[s] = 0
    if busy[s] == 0:
        idle_since[s] = now
    for k in range(ptr[s], ptr[s + 1]):
        n = idx[k]
        busy[n] -= 1
        if busy[n] == 0 and txing[n] == 0:
            idle_since[n] = now
            if bo_slots[n] >= 0 and expiry[n] == INF:
                bo_resume[n] = now + difs
                expiry[n] = bo_resume[n] + bo_slots[n] * slot


def start_backoff(int64_t now, int64_t n, int64_t slots,
                  int64_t[::1] busy, int64_t[::1] txing, int64_t[::1] idle_since,
                  int64_t[::1] bo_slots, int64_t[::1] bo_resume, int64_t[::1] expiry,
                  int64_t difs, int64_t slot):
    bo_slots[n] = slots
    if busy[n] == 0 and txing[n] == 0:
        bo_resume[n] = idle_since[n] + difs
        if bo_resume[n] < now:
            bo_resume[n] = now
        expiry[n] = bo_resume[n] + slots * slot
    else:
        bo_resume[n] = -1
        expiry[n] = INF
    return expiry[n]


def next_expiry(const int64_t[::1] expiry):
    cdef Py_ssize_t i, m = expiry.shape[0]
    cdef int64_t best = INF
    for i in range(m):
        if expiry[i] < best:
            best = expiry[i]
    return best


def due_nodes(int64_t now, int64_t[::1] expiry):
    cdef Py_ssize_t i, m = expiry.shape[0]
    out = []
    for i in range(m):
        if expiry[i] <= now:
            out.append(i)
    return out
