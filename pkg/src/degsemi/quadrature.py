"""Quadrature rules on time intervals that start at zero."""

from functools import lru_cache

import numpy as np

DEFAULT_PANELS = 24


@lru_cache(maxsize=64)
def _gauss(q):
    x, w = np.polynomial.legendre.leggauss(q)
    return x, w


def gauss_interval(a, b, q):
    x, w = _gauss(int(q))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def panel_breaks(T, panels=DEFAULT_PANELS):
    """``[0, T 2^-P, ..., T/2, T]``: dyadic breakpoints graded towards zero."""
    inner = T * 2.0 ** -np.arange(panels, -1, -1)
    return np.concatenate([[0.0], inner])


def geometric_rule(T, nodes, panels=DEFAULT_PANELS):
    """Composite Gauss-Legendre rule on ``[0, T]`` over dyadic panels.

    About ``nodes`` points in total are split evenly over ``panels + 1``
    panels, with at least four per panel. Returns ``(t, w, panel_index)``.
    """
    breaks = panel_breaks(float(T), panels)
    q = max(4, int(nodes) // (len(breaks) - 1))
    ts, ws, idx = [], [], []
    for k in range(len(breaks) - 1):
        t, w = gauss_interval(breaks[k], breaks[k + 1], q)
        ts.append(t)
        ws.append(w)
        idx.append(np.full(q, k))
    return np.concatenate(ts), np.concatenate(ws), np.concatenate(idx)


def geometric_grid(T, nodes, smallest=1e-8):
    """Geometrically spaced sample times from ``smallest * T`` to ``T`` (inclusive)."""
    return T * np.geomspace(smallest, 1.0, int(nodes))


def uniform_grid(a, b, nodes):
    return np.linspace(a, b, max(int(nodes), 2))
