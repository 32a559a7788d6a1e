"""Finite difference kernels with a selectable backend.

Nearly all run time goes into the three stencils exported here, so they
carry a compiled numba implementation next to a pure numpy one. The
active backend is picked at import time from the ``VVLIMIT_KERNELS``
environment variable (``numba``, ``numpy`` or ``auto``; auto prefers
numba and falls back to numpy when numba is unavailable) and can be
switched at runtime with :func:`set_backend`. Both backends perform the
same floating point operations in the same order, so results agree
bitwise; ``benchmarks/kernel_bench.py`` compares their speed.
"""
from __future__ import annotations

import os

from . import numpy_ops

try:
    from . import numba_ops
    HAS_NUMBA = True
except ImportError:
    numba_ops = None
    HAS_NUMBA = False

_BACKENDS = {"numpy": numpy_ops}
if HAS_NUMBA:
    _BACKENDS["numba"] = numba_ops

_active = numpy_ops
_active_name = "numpy"


def set_backend(name: str) -> str:
    """Select the kernel backend; returns the resolved backend name."""
    global _active, _active_name
    name = name.strip().lower() or "auto"
    if name == "auto":
        name = "numba" if HAS_NUMBA else "numpy"
    if name not in _BACKENDS:
        raise ValueError(
            f"unknown kernel backend {name!r}; available: {sorted(_BACKENDS)}"
        )
    _active = _BACKENDS[name]
    _active_name = name
    return name


def backend_name() -> str:
    return _active_name


set_backend(os.environ.get("VVLIMIT_KERNELS", "auto"))


def diff1(f, axis, h):
    return _active.diff1(f, axis, h)


def diff2(f, axis, h):
    return _active.diff2(f, axis, h)


def diff4_raw(f, axis):
    return _active.diff4_raw(f, axis)
