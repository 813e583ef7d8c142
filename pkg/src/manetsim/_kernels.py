"""Vectorized geometry kernels: radio adjacency and waypoint motion.

These are the only O(n^2)/O(n) array loops in the simulator and the
only code worth jitting.  Both kernels exist twice: a numba-compiled
version and a pure-numpy version with the exact same per-element
arithmetic, so the two paths produce bit-identical results.  Set
MANETSIM_NO_NUMBA=1 to force the numpy path (it is also the automatic
fallback when numba is not importable).  benchmarks/bench_kernels.py
times the two paths against each other.
"""

from __future__ import annotations

import math
import os

import numpy as np


def _numpy_adjacency(px, py, range2, out):
    dx = px[:, None] - px[None, :]
    dy = py[:, None] - py[None, :]
    np.less_equal(dx * dx + dy * dy, range2, out=out)
    np.fill_diagonal(out, False)
    return out


def _numpy_advance(px, py, wx, wy, speed, pause_until, now, dt, arrived):
    moving = pause_until <= now
    dx = wx - px
    dy = wy - py
    step = speed * dt
    d2 = dx * dx + dy * dy
    np.logical_and(moving, d2 <= step * step, out=arrived)
    part = moving & ~arrived
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = step / np.sqrt(d2)
    px[part] += (dx * frac)[part]
    py[part] += (dy * frac)[part]
    px[arrived] = wx[arrived]
    py[arrived] = wy[arrived]
    return arrived


def _make_numba_kernels():
    from numba import njit

    @njit(cache=True)
    def adjacency(px, py, range2, out):  # pragma: no cover - jitted
        n = px.shape[0]
        for i in range(n):
            out[i, i] = False
            for j in range(i + 1, n):
                dx = px[i] - px[j]
                dy = py[i] - py[j]
                hit = dx * dx + dy * dy <= range2
                out[i, j] = hit
                out[j, i] = hit
        return out

    @njit(cache=True)
    def advance(px, py, wx, wy, speed, pause_until, now, dt, arrived):  # pragma: no cover - jitted
        n = px.shape[0]
        for i in range(n):
            arrived[i] = False
            if pause_until[i] > now:
                continue
            dx = wx[i] - px[i]
            dy = wy[i] - py[i]
            step = speed[i] * dt
            d2 = dx * dx + dy * dy
            if d2 <= step * step:
                px[i] = wx[i]
                py[i] = wy[i]
                arrived[i] = True
            else:
                frac = step / math.sqrt(d2)
                px[i] += dx * frac
                py[i] += dy * frac
        return arrived

    return adjacency, advance


USING_NUMBA = False
adjacency = _numpy_adjacency
advance = _numpy_advance

if os.environ.get("MANETSIM_NO_NUMBA", "") not in ("1", "true", "yes"):
    try:
        adjacency, advance = _make_numba_kernels()
        USING_NUMBA = True
    except ImportError:
        pass
