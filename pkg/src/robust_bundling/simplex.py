"""Dense-tableau phase-1 simplex with Bland's rule.

Only feasibility of ``A x = b, x >= 0`` is needed, and the systems are tiny
(a handful of moment rows), so a plain tableau is enough.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PhaseOneResult:
    x: np.ndarray
    objective: float
    feasible: bool
    iterations: int
    residual: float


def phase_one(A, b, tol: float = 1e-11, max_iter: int = 10_000) -> PhaseOneResult:
    """Minimise the sum of artificial variables for ``A x = b, x >= 0``."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # columns: originals, artificials, rhs
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = list(range(n, n + m))

    it = 0
    while it < max_iter:
        costs = T[m, : n + m]
        entering = next((j for j in range(n + m) if costs[j] < -tol), None)
        if entering is None:
            break
        col = T[:m, entering]
        rows = [i for i in range(m) if col[i] > tol]
        if not rows:
            # cannot happen in phase 1 (objective is bounded below by 0)
            break
        ratios = [(T[i, -1] / col[i], basis[i], i) for i in rows]
        best = min(r[0] for r in ratios)
        leave = min((r for r in ratios if r[0] <= best + tol * max(1.0, abs(best))), key=lambda r: r[1])[2]
        T[leave] /= T[leave, entering]
        for i in range(m + 1):
            if i != leave and T[i, entering] != 0.0:
                T[i] -= T[i, entering] * T[leave]
        basis[leave] = entering
        it += 1

    x_full = np.zeros(n + m)
    x_full[basis] = T[:m, -1]
    # polish basic values against the original system
    full = np.hstack([A, np.eye(m)])
    try:
        xb = np.linalg.solve(full[:, basis], b)
        if np.all(xb >= -1e-12):
            x_full = np.zeros(n + m)
            x_full[basis] = np.maximum(xb, 0.0)
    except np.linalg.LinAlgError:
        pass
    objective = float(x_full[n:].sum())
    x = x_full[:n]
    residual = float(np.max(np.abs(A @ x - b))) if m else 0.0
    return PhaseOneResult(x=x, objective=objective, feasible=objective <= 1e-9, iterations=it, residual=residual)
