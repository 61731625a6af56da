"""Central finite differences with one level of Richardson extrapolation."""

from __future__ import annotations

from typing import Callable

import numpy as np

DEFAULT_REL_STEP = 1e-5


def step_sizes(theta: np.ndarray, rel_step: float = DEFAULT_REL_STEP) -> np.ndarray:
    return rel_step * np.maximum(1.0, np.abs(theta))


def richardson_jacobian(
    fun: Callable[[np.ndarray], np.ndarray],
    theta: np.ndarray,
    rel_step: float = DEFAULT_REL_STEP,
) -> np.ndarray:
    """Jacobian of ``fun`` at ``theta``; output shape ``fun(theta).shape + (d,)``.

    Each column combines central differences at steps ``h`` and ``h/2`` as
    ``(4 D(h/2) - D(h)) / 3``, cancelling the ``h**2`` truncation term.
    """
    theta = np.asarray(theta, dtype=float)
    hs = step_sizes(theta, rel_step)
    cols = []
    for i, h in enumerate(hs):
        e = np.zeros_like(theta)
        e[i] = 1.0
        d_h = (np.asarray(fun(theta + h * e)) - np.asarray(fun(theta - h * e))) / (2 * h)
        h2 = h / 2
        d_h2 = (np.asarray(fun(theta + h2 * e)) - np.asarray(fun(theta - h2 * e))) / (2 * h2)
        cols.append((4.0 * d_h2 - d_h) / 3.0)
    return np.stack(cols, axis=-1)
