"""Backend switch for the loop kernels.

``RQCLAB_BACKEND=numpy`` forces the pure-numpy path even when numba is
installed; anything else (or unset) uses numba when it imports.
"""
import os

BACKEND = os.environ.get("RQCLAB_BACKEND", "numba").strip().lower()

try:
    if BACKEND == "numpy":
        raise ImportError
    from numba import njit as _njit
except ImportError:
    _njit = None
    BACKEND = "numpy"


def jit(fn):
    """Compile ``fn`` with numba when enabled, otherwise return it untouched."""
    if _njit is None:
        return fn
    return _njit(cache=True, nogil=True)(fn)
