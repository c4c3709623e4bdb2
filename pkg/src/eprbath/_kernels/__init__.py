"""Trajectory-stepping kernels: compiled Cython core with NumPy fallback.

The homodyne record simulation advances O(10^4) trajectories over O(10^3)
small affine steps; that loop dominates the Monte Carlo runtime, so it is
implemented twice with identical arithmetic:

* ``_cystep``      - Cython extension (built by setup.py when a compiler is
                     available),
* ``numpy_backend`` - pure-NumPy version vectorized over trajectories.

Both consume the same pre-drawn noise arrays in the same order, so a given
seed produces the same records on either backend.  The active backend is
chosen at import time; set ``EPRBATH_FORCE_NUMPY_KERNEL=1`` to force the
fallback (used by the equivalence tests and the benchmark).
"""

import os

from . import numpy_backend

__all__ = ["step_chunk", "BACKEND", "get_backends"]

_force_numpy = os.environ.get("EPRBATH_FORCE_NUMPY_KERNEL", "") == "1"

if not _force_numpy:
    try:
        from . import _cystep as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = numpy_backend
        BACKEND = "numpy"
else:
    _impl = numpy_backend
    BACKEND = "numpy"

step_chunk = _impl.step_chunk


def get_backends():
    """Mapping of available backend names to their step functions."""
    backends = {"numpy": numpy_backend.step_chunk}
    try:
        from . import _cystep
        backends["cython"] = _cystep.step_chunk
    except ImportError:
        pass
    return backends
