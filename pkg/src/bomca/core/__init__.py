"""Trajectory integration kernels: compiled core with pure-Python fallback.

The hot loop of the whole package is the adaptive integration of complex
trajectory batches.  At import time this package picks the compiled
Cython kernel when it is available and otherwise falls back to the
numpy implementation; both expose the same functions and arithmetic.

Set ``BOMCA_BACKEND=python`` or ``BOMCA_BACKEND=native`` to force a
choice (``native`` raises if the extension is missing).
"""

import os

from ._status import STATUS_NAMES, TrajectoryStatus  # noqa: F401
from . import _python

_requested = os.environ.get("BOMCA_BACKEND", "auto").lower()
if _requested not in ("auto", "native", "python"):
    raise ImportError(f"BOMCA_BACKEND must be auto/native/python, got {_requested!r}")

_backend = None
if _requested in ("auto", "native"):
    try:
        from . import _native as _backend  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "native":
            raise
        _backend = None
if _backend is None:
    _backend = _python

backend_name = "native" if _backend is not _python else "python"
propagate_final_batch = _backend.propagate_final_batch
rhs_single = _backend.rhs_single


def available_backends():
    """Names of importable kernel backends (python is always present)."""
    names = ["python"]
    try:
        from . import _native  # noqa: F401

        names.append("native")
    except ImportError:
        pass
    return names


def get_backend(name):
    """Fetch a specific backend module by name; used by tests and benchmarks."""
    if name == "python":
        return _python
    if name == "native":
        from . import _native

        return _native
    raise ValueError(f"unknown backend {name!r}")
