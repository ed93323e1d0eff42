"""Compiled inner loops of the SOM process.

All kernels update ``w`` in place.  ``cw_table[k]`` holds per-coordinate
weights of a weighted squared distance (all ones for Euclidean, inverse
masses for chi-square); ``cw_index[t]`` picks the row used at step ``t``.
Ties in the winner search go to the lowest unit index.
"""

import numpy as np
from numba import njit

PRED_ORDERED = 0
PRED_INCREASING = 1
PRED_FPP = 2


@njit(cache=True, nogil=True)
def _winner(w, x, cw):
    n, d = w.shape
    best = 0
    best_d = np.inf
    for i in range(n):
        s = 0.0
        for k in range(d):
            diff = w[i, k] - x[k]
            s += cw[k] * diff * diff
        if s < best_d:
            best_d = s
            best = i
    return best


@njit(cache=True, nogil=True)
def _update(w, x, eps, lam, i0):
    n, d = w.shape
    for i in range(n):
        g = eps * lam[i0, i]
        if g != 0.0:
            for k in range(d):
                w[i, k] -= g * (w[i, k] - x[k])


@njit(cache=True, nogil=True)
def _predicate(w, code, n1):
    n = w.shape[0]
    if code == PRED_ORDERED or code == PRED_INCREASING:
        inc = True
        dec = code == PRED_ORDERED
        for i in range(n - 1):
            a = w[i, 0]
            b = w[i + 1, 0]
            if not a < b:
                inc = False
            if not a > b:
                dec = False
            if not (inc or dec):
                return False
        return inc or dec
    # F++ on an n1 x n2 grid, flat index i1 + n1 * i2
    n2 = n // n1
    for i2 in range(n2):
        for i1 in range(n1 - 1):
            if not w[i1 + n1 * i2, 0] < w[i1 + 1 + n1 * i2, 0]:
                return False
    for i1 in range(n1):
        for i2 in range(n2 - 1):
            if not w[i1 + n1 * i2, 1] < w[i1 + n1 * (i2 + 1), 1]:
                return False
    return True


@njit(cache=True, nogil=True)
def som_steps(w, inputs, gains, lam, cw_table, cw_index):
    for t in range(inputs.shape[0]):
        i0 = _winner(w, inputs[t], cw_table[cw_index[t]])
        _update(w, inputs[t], gains[t], lam, i0)


@njit(cache=True, nogil=True)
def som_steps_until(w, inputs, gains, lam, cw, code, n1, target):
    """Run until the predicate equals ``target``.

    Returns the number of steps taken when that happens, or -1 if the
    chunk is exhausted first.
    """
    for t in range(inputs.shape[0]):
        i0 = _winner(w, inputs[t], cw)
        _update(w, inputs[t], gains[t], lam, i0)
        if _predicate(w, code, n1) == target:
            return t + 1
    return -1


@njit(cache=True, nogil=True)
def som_steps_distance(w, inputs, gains, lam, cw, ref):
    """Run the chunk and return the sum over steps of ``|w(t) - ref|``."""
    n, d = w.shape
    total = 0.0
    for t in range(inputs.shape[0]):
        i0 = _winner(w, inputs[t], cw)
        _update(w, inputs[t], gains[t], lam, i0)
        s = 0.0
        for i in range(n):
            for k in range(d):
                diff = w[i, k] - ref[i, k]
                s += diff * diff
        total += np.sqrt(s)
    return total


def predicate(w, code, n1=1):
    return bool(_predicate(np.ascontiguousarray(w, dtype=np.float64), code, n1))
