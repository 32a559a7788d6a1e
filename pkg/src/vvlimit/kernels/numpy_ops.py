"""Reference stencil implementations, vectorized with np.roll.

All operators act along one periodic axis. The arithmetic here fixes the
operation order for the whole package: the numba backend repeats it
verbatim so that both backends agree bitwise.
"""
from __future__ import annotations

import numpy as np


def diff1(f, axis, h):
    """Second order centered first difference along a periodic axis."""
    return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) * (0.5 / h)


def diff2(f, axis, h):
    """Second order centered second difference along a periodic axis."""
    return (np.roll(f, -1, axis) - 2.0 * f + np.roll(f, 1, axis)) * (1.0 / (h * h))


def diff4_raw(f, axis):
    """Undivided fourth difference, used by the hyper dissipation term."""
    return (
        np.roll(f, -2, axis)
        - 4.0 * np.roll(f, -1, axis)
        + 6.0 * f
        - 4.0 * np.roll(f, 1, axis)
        + np.roll(f, 2, axis)
    )
