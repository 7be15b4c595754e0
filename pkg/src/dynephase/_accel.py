"""Backend selection for the compiled kernels.

Hot loops are written once as plain Python/numpy-compatible functions and
compiled with ``numba.njit`` when it is available.  Setting
``DYNEPHASE_NUMBA=0`` (or running without numba installed) selects the
pure-numpy code paths instead; every kernel has one.

``DYNEPHASE_THREADS`` caps the numba thread pool.
"""

import os

_FALSEY = {"0", "false", "no", "off"}

try:
    if os.environ.get("DYNEPHASE_NUMBA", "1").strip().lower() in _FALSEY:
        raise ImportError("numba disabled by DYNEPHASE_NUMBA")
    # OpenMP is thread-safe and avoids numba probing an old system TBB.
    os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")
    import numba
except ImportError:  # pragma: no cover - exercised through the env flag
    numba = None

NUMBA_ENABLED = numba is not None


def _thread_cap():
    raw = os.environ.get("DYNEPHASE_THREADS")
    if not raw:
        return None
    try:
        return max(1, int(raw))
    except ValueError:
        return None


if NUMBA_ENABLED:
    _cap = _thread_cap()
    if _cap is not None:
        numba.set_num_threads(min(_cap, numba.config.NUMBA_NUM_THREADS))


def jit(func=None, **options):
    """``numba.njit(cache=True)`` when numba is enabled, identity otherwise."""
    options.setdefault("cache", True)

    def wrap(f):
        if not NUMBA_ENABLED:
            return f
        return numba.njit(**options)(f)

    if func is not None:
        return wrap(func)
    return wrap


def backend():
    """Name of the active kernel backend: ``"numba"`` or ``"numpy"``."""
    return "numba" if NUMBA_ENABLED else "numpy"


def resolve(use_numba):
    """Map a per-call ``use_numba`` override onto an available backend."""
    if use_numba is None:
        return NUMBA_ENABLED
    if use_numba and not NUMBA_ENABLED:
        raise RuntimeError("numba backend requested but numba is disabled or missing")
    return bool(use_numba)
