"""Numba kernels for symmetric banded matrices in lower band storage.

Storage convention: ``ab[k, i] = A[i, i - k]`` for ``k = 0..w``; entries with
``i < k`` are ignored.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def ldl_banded(ab):
    """Root-free LDL^T factorization. Returns (L band, D, failing pivot or -1).

    ``L`` is unit lower triangular and stored like ``ab`` (row 0 is all ones).
    """
    w = ab.shape[0] - 1
    n = ab.shape[1]
    lb = np.zeros_like(ab)
    d = np.zeros(n)
    for i in range(n):
        lb[0, i] = 1.0
        j0 = max(0, i - w)
        for j in range(j0, i):
            # L[i, j] = (A[i, j] - sum_m L[i, m] D[m] L[j, m]) / D[j]
            s = ab[i - j, i]
            for m in range(max(j0, j - w), j):
                s -= lb[i - m, i] * d[m] * lb[j - m, j]
            lb[i - j, i] = s / d[j]
        s = ab[0, i]
        for m in range(j0, i):
            lim = lb[i - m, i]
            s -= lim * lim * d[m]
        if not (s > 0.0) or not math.isfinite(s):
            return lb, d, i
        d[i] = s
    return lb, d, -1


@njit(cache=True)
def forward_unit(lb, b):
    """Solve L u = b for unit lower banded L."""
    w = lb.shape[0] - 1
    n = lb.shape[1]
    u = b.copy()
    for i in range(n):
        s = u[i]
        for m in range(max(0, i - w), i):
            s -= lb[i - m, i] * u[m]
        u[i] = s
    return u


@njit(cache=True)
def backward_unit_t(lb, v):
    """Solve L^T y = v for unit lower banded L."""
    w = lb.shape[0] - 1
    n = lb.shape[1]
    y = v.copy()
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, min(n, i + w + 1)):
            s -= lb[k - i, k] * y[k]
        y[i] = s
    return y


@njit(cache=True)
def quad_form_ldl(lb, d, x):
    """x^T (L D L^T) x evaluated as sum_i d_i (L^T x)_i^2."""
    w = lb.shape[0] - 1
    n = lb.shape[1]
    total = 0.0
    for i in range(n):
        s = x[i]
        for k in range(i + 1, min(n, i + w + 1)):
            s += lb[k - i, k] * x[k]
        total += d[i] * s * s
    return total
