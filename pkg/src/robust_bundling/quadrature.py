"""Numerical integration helpers.

Two rules live here: composite Gauss-Legendre for the smooth integrals
inside the bundle solver, and adaptive Simpson for expectations against
arbitrary (vectorised) integrands.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable

import numpy as np


@lru_cache(maxsize=8)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def gauss_legendre(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    panels: int = 1,
    order: int = 32,
) -> float:
    """Composite Gauss-Legendre rule for a vectorised ``f`` on ``[a, b]``."""
    if b == a:
        return 0.0
    nodes, weights = _legendre(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return float(np.dot(w, f(x)))


def adaptive_simpson(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = 1e-10,
    max_depth: int = 48,
) -> float:
    """Adaptive Simpson with Richardson correction on ``[a, b]``.

    ``f`` must accept a 1-D array of abscissae.  The tolerance is absolute
    and is split between subintervals as they are bisected.
    """
    if b == a:
        return 0.0
    fa, fm, fb = f(np.array([a, 0.5 * (a + b), b]))
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    # (a, b, fa, fm, fb, whole, tol, depth)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        fl, fr = f(np.array([0.5 * (lo + mid), 0.5 * (mid + hi)]))
        left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi)
        delta = left + right - est
        if depth >= max_depth or abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
            continue
        stack.append((mid, hi, fmid, fr, fhi, right, 0.5 * eps, depth + 1))
        stack.append((lo, mid, flo, fl, fmid, left, 0.5 * eps, depth + 1))
    return float(total)


def piecewise_simpson(
    f: Callable[[np.ndarray], np.ndarray],
    breaks: list[float],
    tol: float = 1e-10,
) -> float:
    """Adaptive Simpson over consecutive panels ``breaks[k]..breaks[k+1]``."""
    pts = sorted(set(float(b) for b in breaks))
    if len(pts) < 2:
        return 0.0
    share = tol / (len(pts) - 1)
    return math.fsum(adaptive_simpson(f, lo, hi, share) for lo, hi in zip(pts[:-1], pts[1:]))
