"""Pure-python reference kernels.

These define the semantics; the compiled versions in _core.pyx must agree
bit for bit.  The histogram is vectorized with a sliding searchsorted
window, the dead-time filter is inherently sequential.
"""

import numpy as np


def pair_delay_histogram(t0, t1, max_delay_ps, bin_ps):
    """Histogram of delays t1[j] - t0[i] within +/- max_delay_ps.

    Both timestamp arrays must be sorted ascending (int64 ps).  Bins are
    bin_ps wide; the histogram has 2 * (max_delay_ps // bin_ps) + 1 bins
    and zero delay falls in the exact center bin.  Bin k covers shifted
    delays [k * bin_ps, (k+1) * bin_ps) where shifted = delay + offset and
    offset = (nbins // 2) * bin_ps + bin_ps // 2.
    """
    t0 = np.ascontiguousarray(t0, dtype=np.int64)
    t1 = np.ascontiguousarray(t1, dtype=np.int64)
    if bin_ps <= 0 or max_delay_ps < bin_ps:
        raise ValueError("need bin_ps > 0 and max_delay_ps >= bin_ps")
    nbins = 2 * int(max_delay_ps // bin_ps) + 1
    offset = (nbins // 2) * bin_ps + bin_ps // 2
    span = nbins * bin_ps
    hist = np.zeros(nbins, dtype=np.int64)
    if t0.size == 0 or t1.size == 0:
        return hist
    lo = np.searchsorted(t1, t0 - offset, side="left")
    hi = np.searchsorted(t1, t0 - offset + span, side="left")
    chunk = 65536
    for s in range(0, t0.size, chunk):
        l = lo[s : s + chunk]
        h = hi[s : s + chunk]
        n = h - l
        total = int(n.sum())
        if total == 0:
            continue
        csum = np.concatenate(([0], np.cumsum(n)[:-1]))
        flat = np.repeat(l - csum, n) + np.arange(total)
        deltas = t1[flat] - np.repeat(t0[s : s + chunk], n)
        hist += np.bincount((deltas + offset) // bin_ps, minlength=nbins)
    return hist


def dead_time_filter(timestamps, dead_ps):
    """Boolean keep-mask applying a non-paralyzable dead time.

    A tag is kept when it arrives at least dead_ps after the last *kept*
    tag; the first tag is always kept.  Input must be sorted ascending.
    """
    t = np.ascontiguousarray(timestamps, dtype=np.int64)
    if dead_ps < 0:
        raise ValueError("dead time must be >= 0")
    keep = np.zeros(t.size, dtype=bool)
    if t.size == 0:
        return keep
    last = t[0] - dead_ps - 1
    for i in range(t.size):
        if t[i] - last >= dead_ps:
            keep[i] = True
            last = t[i]
    return keep
