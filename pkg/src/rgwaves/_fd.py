"""Finite-difference helpers on the smooth pieces of a sampled profile."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline


def fornberg_weights(x0, offsets, order):
    """Fornberg's recursion for FD weights of derivatives 0..order at x0."""
    z = np.asarray(offsets, dtype=float)
    n = len(z)
    c = np.zeros((n, order + 1))
    c1, c4 = 1.0, z[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, z[i] - x0
        for j in range(i):
            c3 = z[i] - z[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


@lru_cache(maxsize=None)
def _stencils(order, accuracy):
    m = (2 * ((order + 1) // 2) - 1 + accuracy) // 2
    central = fornberg_weights(0.0, tuple(range(-m, m + 1)), order)[:, order]
    width = order + accuracy + 1
    edge = [fornberg_weights(0.0, tuple(range(-i, width - i)), order)[:, order]
            for i in range(m)]
    return m, central, edge


def _uniform(x, rtol=1e-9):
    d = np.diff(x)
    return d.size > 0 and np.all(np.abs(d - d.mean()) <= rtol * abs(d.mean()))


def derivative(x, f, order=1, accuracy=6):
    """Finite-difference derivative of samples f on one smooth piece.

    Central stencils inside and one-sided stencils of the same accuracy at
    the samples nearest each end. Short or nonuniform pieces fall back to a
    cubic spline.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f)
    n = x.size
    m, central, edge = _stencils(order, accuracy)
    width = len(edge[0])
    if n < max(width, 2 * m + 1) or not _uniform(x):
        if n < 2:
            return np.zeros_like(f)
        if n < 4:
            return np.gradient(f, x, edge_order=1) if order == 1 else np.zeros_like(f)
        return CubicSpline(x, f)(x, order)
    dx = (x[-1] - x[0]) / (n - 1)
    out = np.empty_like(f)
    out[m:n - m] = sum(w * f[k:n - 2 * m + k] for k, w in enumerate(central))
    rev = f[::-1]
    for i in range(m):
        out[i] = np.dot(edge[i], f[0:width])
        # mirrored stencil: odd derivatives flip sign
        out[n - 1 - i] = (-1) ** order * np.dot(edge[i], rev[0:width])
    return out / dx ** order


def derivative2(x, f):
    return derivative(x, f, order=2)


def second_order_derivative(x, f):
    """Plain second-order estimate, used to validate the stencils."""
    if len(x) < 3:
        return np.zeros_like(f)
    return np.gradient(f, x, edge_order=2)
