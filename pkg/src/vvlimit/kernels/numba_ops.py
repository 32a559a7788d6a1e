"""Compiled loop stencils, bitwise equivalent to the numpy backend.

Any array is viewed as (pre, n, post) with the worked axis in the middle,
so a single 3d kernel serves every dimension/axis pair the solver uses.
The loops keep exactly the operation order of ``numpy_ops``.
"""
from __future__ import annotations

import numpy as np
from numba import njit


def _as3d(f, axis):
    f = np.ascontiguousarray(f)
    pre = 1
    for s in f.shape[:axis]:
        pre *= s
    post = 1
    for s in f.shape[axis + 1:]:
        post *= s
    return f.reshape(pre, f.shape[axis], post)


@njit(cache=True)
def _diff1_core(g, inv2h):
    p, n, q = g.shape
    out = np.empty_like(g)
    for i in range(p):
        for j in range(n):
            jp = j + 1 if j + 1 < n else 0
            jm = j - 1 if j >= 1 else n - 1
            for k in range(q):
                out[i, j, k] = (g[i, jp, k] - g[i, jm, k]) * inv2h
    return out


@njit(cache=True)
def _diff2_core(g, invh2):
    p, n, q = g.shape
    out = np.empty_like(g)
    for i in range(p):
        for j in range(n):
            jp = j + 1 if j + 1 < n else 0
            jm = j - 1 if j >= 1 else n - 1
            for k in range(q):
                out[i, j, k] = (g[i, jp, k] - 2.0 * g[i, j, k] + g[i, jm, k]) * invh2
    return out


@njit(cache=True)
def _diff4_core(g):
    p, n, q = g.shape
    out = np.empty_like(g)
    for i in range(p):
        for j in range(n):
            jp1 = j + 1 if j + 1 < n else 0
            jp2 = jp1 + 1 if jp1 + 1 < n else 0
            jm1 = j - 1 if j >= 1 else n - 1
            jm2 = jm1 - 1 if jm1 >= 1 else n - 1
            for k in range(q):
                out[i, j, k] = (
                    g[i, jp2, k]
                    - 4.0 * g[i, jp1, k]
                    + 6.0 * g[i, j, k]
                    - 4.0 * g[i, jm1, k]
                    + g[i, jm2, k]
                )
    return out


def diff1(f, axis, h):
    return _diff1_core(_as3d(f, axis), 0.5 / h).reshape(f.shape)


def diff2(f, axis, h):
    return _diff2_core(_as3d(f, axis), 1.0 / (h * h)).reshape(f.shape)


def diff4_raw(f, axis):
    return _diff4_core(_as3d(f, axis)).reshape(f.shape)
