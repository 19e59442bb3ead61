"""Strongly convex dispersion kernels ``phi(x) = a*x**2 + b*x**4``.

The quadratic kernel (``a=1, b=0``) measures variance.  Adding a quartic term
keeps ``phi(0) = 0`` and ``phi'' >= 2a > 0`` everywhere, which is all the
saddle-point construction needs, while every integral that appears against
the Pareto driver stays available in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np


@dataclass(frozen=True)
class DispersionFunction:
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self) -> None:
        if not (self.a > 0.0 and np.isfinite(self.a)):
            raise ValueError(f"dispersion coefficient a must be positive, got {self.a}")
        if not (self.b >= 0.0 and np.isfinite(self.b)):
            raise ValueError(f"dispersion coefficient b must be nonnegative, got {self.b}")

    @classmethod
    def quadratic(cls) -> "DispersionFunction":
        return cls(1.0, 0.0)

    @classmethod
    def quartic(cls, a: float, b: float) -> "DispersionFunction":
        return cls(float(a), float(b))

    @property
    def kind(self) -> str:
        return "quadratic" if (self.a == 1.0 and self.b == 0.0) else "quartic"

    @property
    def curvature_floor(self) -> float:
        """Lower bound on ``phi''``."""
        return 2.0 * self.a

    def __call__(self, x):
        return eval_phi(self, x)

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "quadratic":
            return {"kind": "quadratic"}
        return {"kind": "quartic", "a": self.a, "b": self.b}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DispersionFunction":
        kind = d.get("kind")
        if kind == "quadratic":
            return cls.quadratic()
        if kind == "quartic":
            return cls.quartic(d["a"], d.get("b", 0.0))
        raise ValueError(f"unknown dispersion kind {kind!r}")

    def coefficients(self) -> np.ndarray:
        """Power-series coefficients of phi, lowest degree first."""
        return np.array([0.0, 0.0, self.a, 0.0, self.b])


def eval_phi(phi: DispersionFunction, x):
    x2 = np.multiply(x, x)
    return phi.a * x2 + phi.b * x2 * x2


def deriv(phi: DispersionFunction, x, order: int = 1):
    """Analytic first or second derivative of the kernel."""
    if order == 1:
        return 2.0 * phi.a * np.asarray(x) + 4.0 * phi.b * np.power(x, 3)
    if order == 2:
        return 2.0 * phi.a + 12.0 * phi.b * np.multiply(x, x)
    raise ValueError(f"order must be 1 or 2, got {order}")


def shifted_coefficients(phi: DispersionFunction, shift: float) -> np.ndarray:
    """Coefficients of ``p -> phi(p - shift)`` as a polynomial in ``p``."""
    poly = np.polynomial.Polynomial(phi.coefficients())
    return poly(np.polynomial.Polynomial([-shift, 1.0])).coef
