"""Event-stream kernels with a compiled fast path.

The compiled extension is optional: if it is missing (or the
QEPOL_PURE_PYTHON environment variable is set to a non-empty value) the
pure-python reference implementation is used instead.  Both paths produce
identical results; HAVE_COMPILED records which one is active.
"""

import os

from . import _fallback

if os.environ.get("QEPOL_PURE_PYTHON"):
    _impl = _fallback
    HAVE_COMPILED = False
else:
    try:
        from . import _core as _impl

        HAVE_COMPILED = True
    except ImportError:
        _impl = _fallback
        HAVE_COMPILED = False

pair_delay_histogram = _impl.pair_delay_histogram
dead_time_filter = _impl.dead_time_filter

__all__ = ["pair_delay_histogram", "dead_time_filter", "HAVE_COMPILED"]
