"""Compiled inner loops for LUT accumulation and lookup.

Both kernels visit pairs in input order and the eight corners in the
``CORNERS`` order of :mod:`lutharm.lut`, so their floating-point results
match the vectorized numpy formulation.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _cell(c, bins, scale):
    t = c * scale
    if t < 0.0:
        t = 0.0
    elif t > bins:
        t = float(bins)
    i = int(np.floor(t))
    if i > bins - 1:
        i = bins - 1
    return i, t - i


@njit(cache=True, nogil=True)
def accumulate(inputs, targets, bins, wsum, tsum):
    """Add similarity weights and weighted targets into flat accumulators."""
    n = bins + 1
    scale = bins / 256.0
    for p in range(inputs.shape[0]):
        r0, fr = _cell(inputs[p, 0], bins, scale)
        g0, fg = _cell(inputs[p, 1], bins, scale)
        b0, fb = _cell(inputs[p, 2], bins, scale)
        wr = (1.0 - fr, fr)
        wg = (1.0 - fg, fg)
        wb = (1.0 - fb, fb)
        t0 = targets[p, 0]
        t1 = targets[p, 1]
        t2 = targets[p, 2]
        for dr in range(2):
            for dg in range(2):
                for db in range(2):
                    w = wr[dr] * wg[dg] * wb[db]
                    k = ((r0 + dr) * n + g0 + dg) * n + b0 + db
                    wsum[k] += w
                    tsum[k, 0] += w * t0
                    tsum[k, 1] += w * t1
                    tsum[k, 2] += w * t2


@njit(cache=True, nogil=True)
def lookup(colors, bins, table, live, out, valid):
    """Null-aware trilinear lookup of each color; writes ``out`` and ``valid``."""
    n = bins + 1
    scale = bins / 256.0
    for p in range(colors.shape[0]):
        r0, fr = _cell(colors[p, 0], bins, scale)
        g0, fg = _cell(colors[p, 1], bins, scale)
        b0, fb = _cell(colors[p, 2], bins, scale)
        wr = (1.0 - fr, fr)
        wg = (1.0 - fg, fg)
        wb = (1.0 - fb, fb)
        total = 0.0
        a0 = 0.0
        a1 = 0.0
        a2 = 0.0
        for dr in range(2):
            for dg in range(2):
                for db in range(2):
                    k = ((r0 + dr) * n + g0 + dg) * n + b0 + db
                    if live[k]:
                        w = wr[dr] * wg[dg] * wb[db]
                        total += w
                        a0 += w * table[k, 0]
                        a1 += w * table[k, 1]
                        a2 += w * table[k, 2]
        if total > 0.0:
            out[p, 0] = a0 / total
            out[p, 1] = a1 / total
            out[p, 2] = a2 / total
            valid[p] = True
        else:
            out[p, 0] = np.nan
            out[p, 1] = np.nan
            out[p, 2] = np.nan
            valid[p] = False
