# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled event-stream kernels.

Semantics are defined by _fallback.py; these must agree bit for bit.
"""

import numpy as np


def pair_delay_histogram(t0, t1, max_delay_ps, bin_ps):
    """See _fallback.pair_delay_histogram."""
    if bin_ps <= 0 or max_delay_ps < bin_ps:
        raise ValueError("need bin_ps > 0 and max_delay_ps >= bin_ps")
    cdef long long[::1] a = np.ascontiguousarray(t0, dtype=np.int64)
    cdef long long[::1] b = np.ascontiguousarray(t1, dtype=np.int64)
    cdef long long binw = bin_ps
    cdef long long nbins = 2 * (<long long>max_delay_ps // binw) + 1
    cdef long long offset = (nbins // 2) * binw + binw // 2
    cdef long long span = nbins * binw
    hist = np.zeros(nbins, dtype=np.int64)
    cdef long long[::1] hv = hist
    cdef Py_ssize_t n0 = a.shape[0], n1 = b.shape[0]
    cdef Py_ssize_t i, j, lo = 0, hi = 0
    cdef long long ti, lo_edge
    for i in range(n0):
        ti = a[i]
        lo_edge = ti - offset
        while lo < n1 and b[lo] < lo_edge:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < n1 and b[hi] < lo_edge + span:
            hi += 1
        for j in range(lo, hi):
            hv[(b[j] - ti + offset) // binw] += 1
    return hist


def dead_time_filter(timestamps, dead_ps):
    """See _fallback.dead_time_filter."""
    if dead_ps < 0:
        raise ValueError("dead time must be >= 0")
    cdef long long[::1] t = np.ascontiguousarray(timestamps, dtype=np.int64)
    cdef Py_ssize_t n = t.shape[0]
    keep = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] kv = keep
    cdef long long dead = dead_ps
    cdef long long last
    cdef Py_ssize_t i
    if n == 0:
        return keep.view(np.bool_)
    last = t[0] - dead - 1
    for i in range(n):
        if t[i] - last >= dead:
            kv[i] = 1
            last = t[i]
    return keep.view(np.bool_)
