"""Finite-difference weights on arbitrary one-dimensional grids.

Implements Fornberg's recursion for the weights of the ``m``-th derivative
at a point from an arbitrary set of nodes, plus convenience routines that
differentiate sampled data with a moving 5-point (or wider) window.  On a
uniform grid the interior stencils are the classical centered ones and the
first/second derivatives are 4th-order accurate.
"""

from __future__ import annotations

import numpy as np

__all__ = ["fd_weights", "derivative"]


def fd_weights(x: np.ndarray, x0: float, m: int) -> np.ndarray:
    """Weights ``w`` such that ``sum(w * f(x)) ~ f^(m)(x0)``.

    Fornberg (1988) recursion; returns the weights for the derivative order
    ``m`` only.  ``x`` must contain distinct nodes, ``len(x) > m``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n <= m:
        raise ValueError("need more nodes than the derivative order")
    c = np.zeros((n, m + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                # row i is built from the not-yet-updated row i-1
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def derivative(x: np.ndarray, y: np.ndarray, m: int, stencil: int = 5) -> np.ndarray:
    """Differentiate samples ``y(x)`` with a moving ``stencil``-point window.

    Window is centered in the interior and clamped at the edges.  For a
    uniform grid and ``stencil=5`` this is the standard 4th-order scheme.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < stencil:
        raise ValueError(f"need at least {stencil} samples, got {n}")
    half = stencil // 2
    out = np.empty_like(y)
    uniform = np.allclose(np.diff(x), x[1] - x[0], rtol=1e-12, atol=0.0)
    if uniform:
        h = x[1] - x[0]
        offsets = np.arange(stencil, dtype=float)
        cache = {}
        for i in range(n):
            lo = min(max(i - half, 0), n - stencil)
            pos = i - lo
            if pos not in cache:
                cache[pos] = fd_weights(offsets * h, pos * h, m)
            out[i] = cache[pos] @ y[lo:lo + stencil]
        return out
    for i in range(n):
        lo = min(max(i - half, 0), n - stencil)
        w = fd_weights(x[lo:lo + stencil], x[i], m)
        out[i] = w @ y[lo:lo + stencil]
    return out
