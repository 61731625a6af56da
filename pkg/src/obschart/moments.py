"""Moment/cumulant conversions for univariate distributions."""

from __future__ import annotations

from math import comb

import numpy as np


def cumulants_from_moments(moments) -> np.ndarray:
    """Cumulants ``k_1..k_n`` from raw moments ``m_1..m_n``.

    Uses ``k_n = m_n - sum_{j=1}^{n-1} C(n-1, j-1) k_j m_{n-j}``.
    Passing central moments (``m_1 = 0``) gives the cumulants of the centred
    variable, which equal the original ones from order 2 on.
    """
    m = np.concatenate([[1.0], np.asarray(moments, dtype=float)])
    n = len(m) - 1
    k = np.zeros(n + 1)
    for r in range(1, n + 1):
        k[r] = m[r] - sum(comb(r - 1, j - 1) * k[j] * m[r - j] for j in range(1, r))
    return k[1:]


def cumulant_gradient(moments, order: int) -> np.ndarray:
    """Partial derivatives of ``k_order`` with respect to ``m_1..m_order``.

    Forward-mode propagation through the same recursion as
    :func:`cumulants_from_moments`.
    """
    m = np.concatenate([[1.0], np.asarray(moments, dtype=float)[:order]])
    k = np.zeros(order + 1)
    dm = np.zeros((order + 1, order))
    for r in range(1, order + 1):
        dm[r, r - 1] = 1.0
    dk = np.zeros((order + 1, order))
    for r in range(1, order + 1):
        k[r] = m[r]
        dk[r] = dm[r].copy()
        for j in range(1, r):
            c = comb(r - 1, j - 1)
            k[r] -= c * k[j] * m[r - j]
            dk[r] -= c * (dk[j] * m[r - j] + k[j] * dm[r - j])
    return dk[order]


def gaussian_raw_moments(mean: float, sd: float, order: int) -> np.ndarray:
    """Raw moments ``E[Y^k]``, ``k=1..order`` of ``N(mean, sd^2)``."""
    # E[Z^j] for standard normal: (j-1)!! for even j, 0 otherwise
    z = np.zeros(order + 1)
    z[0] = 1.0
    for j in range(2, order + 1, 2):
        z[j] = z[j - 2] * (j - 1)
    out = np.empty(order)
    for k in range(1, order + 1):
        out[k - 1] = sum(comb(k, j) * mean ** (k - j) * sd**j * z[j] for j in range(k + 1))
    return out
