"""Backend switch for the numeric kernels.

Kernels are written once as plain loops over numpy arrays. When numba is
importable and ``CASELENS_BACKEND`` is not ``numpy`` they are compiled with
``numba.njit``; otherwise the same functions run as ordinary Python. All
randomness is drawn by the caller with numpy and passed in, so both backends
consume identical random streams.
"""

from __future__ import annotations

import logging
import os

log = logging.getLogger(__name__)

_requested = os.environ.get("CASELENS_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"CASELENS_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    if _requested == "numpy":
        raise ImportError("numpy backend requested")
    import numba

    BACKEND = "numba"
except ImportError:
    numba = None
    BACKEND = "numpy"


def kernel(func):
    """Compile ``func`` with numba when the numba backend is active."""
    if BACKEND == "numba":
        return numba.njit(cache=True, nogil=True)(func)
    return func


def py_func(func):
    """Return the uncompiled Python version of a kernel."""
    return getattr(func, "py_func", func)
