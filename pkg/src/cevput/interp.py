"""Local Lagrange interpolation on (possibly non-uniform) node sets."""

from __future__ import annotations

import numpy as np


def _window(x_nodes: np.ndarray, x: float, npts: int) -> int:
    j = int(np.searchsorted(x_nodes, x))
    return max(0, min(len(x_nodes) - npts, j - npts // 2))


def lagrange_value(x_nodes, values, x: float, npts: int = 5) -> float:
    """Interpolate values at x with an npts-point Lagrange polynomial."""
    x_nodes = np.asarray(x_nodes)
    lo = _window(x_nodes, x, npts)
    xs = x_nodes[lo:lo + npts]
    total = 0.0
    for i in range(npts):
        basis = 1.0
        for m in range(npts):
            if m != i:
                basis *= (x - xs[m]) / (xs[i] - xs[m])
        total += values[lo + i] * basis
    return total


def lagrange_slope(x_nodes, values, x: float, npts: int = 4) -> float:
    """Derivative of the local Lagrange interpolant at x."""
    x_nodes = np.asarray(x_nodes)
    lo = _window(x_nodes, x, npts)
    xs = x_nodes[lo:lo + npts]
    total = 0.0
    for i in range(npts):
        dbasis = 0.0
        for m in range(npts):
            if m == i:
                continue
            part = 1.0 / (xs[i] - xs[m])
            for q in range(npts):
                if q != i and q != m:
                    part *= (x - xs[q]) / (xs[i] - xs[q])
            dbasis += part
        total += values[lo + i] * dbasis
    return total
