"""Numba switch.

Set ``DAGKERNELS_DISABLE_NUMBA=1`` to run the pure-numpy code paths.  The
flag is read once at import time.
"""
import os
import warnings

_flag = os.environ.get("DAGKERNELS_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = _flag not in ("1", "true", "yes", "on")

if USE_NUMBA:
    try:
        # try OpenMP before TBB; an old system TBB only triggers a warning
        os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")
        warnings.filterwarnings("ignore", message="The TBB threading layer")
        import numba
        from numba import njit, prange
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False

if not USE_NUMBA:
    numba = None
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


def set_threads(n):
    """Set the worker thread count for parallel numba kernels (no-op otherwise)."""
    if n is None or not USE_NUMBA:
        return
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
