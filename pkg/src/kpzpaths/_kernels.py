"""Compiled sweeps shared by the LPP, polymer and Busemann modules.

Every sweep runs over a grid indexed ``[row, col]`` in the up-right orientation.
Reversed orientations are handled by the callers through array reversal.
"""

from __future__ import annotations

import math

import numba
import numpy as np

NEG_INF = -np.inf


@numba.njit(cache=True, nogil=True)
def _logaddexp(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@numba.njit(cache=True, nogil=True)
def lpp_sweep(w, floor):
    """G[y,x] = w[y,x] + max(G[y,x-1], G[y-1,x]) with G[-1,x] = floor[x].

    Columns left of the grid are -inf.  With ``floor = [0, -inf, ...]`` this is
    the point-to-point field from the lower-left corner.
    """
    h, wd = w.shape
    G = np.empty((h, wd))
    G[0, 0] = w[0, 0] + floor[0]
    for x in range(1, wd):
        a = G[0, x - 1]
        b = floor[x]
        G[0, x] = w[0, x] + (a if a > b else b)
    for y in range(1, h):
        G[y, 0] = w[y, 0] + G[y - 1, 0]
        for x in range(1, wd):
            a = G[y, x - 1]
            b = G[y - 1, x]
            G[y, x] = w[y, x] + (a if a > b else b)
    return G


@numba.njit(cache=True, nogil=True)
def logz_sweep(lw, floor):
    """Log-space counterpart of :func:`lpp_sweep` with logaddexp in place of max."""
    h, wd = lw.shape
    L = np.empty((h, wd))
    L[0, 0] = lw[0, 0] + _logaddexp(NEG_INF, floor[0])
    for x in range(1, wd):
        L[0, x] = lw[0, x] + _logaddexp(L[0, x - 1], floor[x])
    for y in range(1, h):
        L[y, 0] = lw[y, 0] + L[y - 1, 0]
        for x in range(1, wd):
            L[y, x] = lw[y, x] + _logaddexp(L[y, x - 1], L[y - 1, x])
    return L


@numba.njit(cache=True, nogil=True)
def backtrack(G, tx, ty):
    """Argmax path from (0,0) to (tx,ty) in a field from the lower-left corner.

    At each backward step the larger predecessor wins; a tie goes to the one
    below (the -e2 direction).  Returns an (k, 2) array of (col, row) pairs.
    """
    k = tx + ty + 1
    out = np.empty((k, 2), dtype=np.int64)
    x = tx
    y = ty
    i = k - 1
    while True:
        out[i, 0] = x
        out[i, 1] = y
        if x == 0 and y == 0:
            break
        if x == 0:
            y -= 1
        elif y == 0:
            x -= 1
        elif G[y - 1, x] >= G[y, x - 1]:
            y -= 1
        else:
            x -= 1
        i -= 1
    return out


@numba.njit(cache=True, nogil=True)
def lpp_first_entry(w, r):
    """Column where the corner-to-corner geodesic first enters row ``r``."""
    h, wd = w.shape
    floor = np.full(wd, NEG_INF)
    floor[0] = 0.0
    G = lpp_sweep(w, floor)
    x = wd - 1
    y = h - 1
    while y >= r:
        if y == r:
            # walk left along row r until the path came up from row r-1
            while x > 0 and G[r - 1, x] < G[r, x - 1]:
                x -= 1
            return x
        if x == 0:
            y -= 1
        elif G[y - 1, x] >= G[y, x - 1]:
            y -= 1
        else:
            x -= 1
    return -1


@numba.njit(cache=True, nogil=True)
def lpp_entry_and_excursion(w, r):
    """First-entry column into row ``r`` and max of x - y over geodesic vertices with y <= r."""
    h, wd = w.shape
    floor = np.full(wd, NEG_INF)
    floor[0] = 0.0
    G = lpp_sweep(w, floor)
    x = wd - 1
    y = h - 1
    entry = -1
    best = -(h + wd)
    while True:
        if y <= r:
            if x - y > best:
                best = x - y
        if x == 0 and y == 0:
            break
        if x == 0:
            up = True
        elif y == 0:
            up = False
        else:
            up = G[y - 1, x] >= G[y, x - 1]
        if y == r and up and entry < 0:
            entry = x
        if up:
            y -= 1
        else:
            x -= 1
    if entry < 0:
        entry = 0
    return entry, best


@numba.njit(cache=True, nogil=True)
def _scaled_rows(e, c, last_row, out):
    """Forward partition sums from (0,0) over rows 0..last_row with weights 1/e.

    Each row is rescaled by its maximum after being formed and every weight
    carries the factor exp(-c), so values stay O(1) without logarithms.  Writes
    the rescaled final row into ``out`` and returns the accumulated log scale.
    """
    wd = e.shape[1]
    k = math.exp(-c)
    row = np.empty(wd)
    acc = 0.0
    for y in range(last_row + 1):
        if y == 0:
            row[0] = k / e[0, 0]
            for x in range(1, wd):
                row[x] = row[x - 1] * (k / e[0, x])
        else:
            row[0] = row[0] * (k / e[y, 0])
            for x in range(1, wd):
                row[x] = (row[x - 1] + row[x]) * (k / e[y, x])
        m = 0.0
        for x in range(wd):
            if row[x] > m:
                m = row[x]
        inv = 1.0 / m
        for x in range(wd):
            row[x] *= inv
        acc += math.log(m)
    for x in range(wd):
        out[x] = row[x]
    return acc


@numba.njit(cache=True, nogil=True)
def polymer_first_entry_mass(e, r, c):
    """Quenched law of the column where the corner-to-corner polymer enters row ``r``.

    ``e`` holds Exp(1) variables whose reciprocals are the Ga^{-1}(1) weights.
    Returns (mass over columns, log Z of the whole rectangle).
    """
    h, wd = e.shape
    fwd = np.empty(wd)
    bwd = np.empty(wd)
    s_f = _scaled_rows(e, c, r - 1, fwd)
    rev = e[::-1, ::-1].copy()
    s_b = _scaled_rows(rev, c, h - 1 - r, bwd)
    mass = np.empty(wd)
    tot = 0.0
    for x in range(wd):
        mass[x] = fwd[x] * bwd[wd - 1 - x]
        tot += mass[x]
    for x in range(wd):
        mass[x] /= tot
    logz = math.log(tot) + s_f + s_b + c * (h + wd - 1)
    return mass, logz
