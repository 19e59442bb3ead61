"""The worst-case value distribution as a one-parameter curve.

Values are driven by a scalar ``x`` with Pareto cdf ``H(y) = 1 - 1/y`` on
``[1, inf)``.  Item ``i`` in bundle ``K`` receives ``gamma_i * min(alpha_K*y,
beta_K)`` where ``y = x`` unless a flattening shift is active (used by the
bundling counterexample), in which case ``y = x + eps`` for ``x`` beyond
``shift_at - eps``.  Past the last cap every coordinate is constant, so the
residual Pareto tail collapses into a single top atom.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .quadrature import piecewise_simpson
from .saddle_core import SaddleSolution

EXPECT_TOL = 1e-10

Integrand = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DiscreteDistribution:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] != w.shape[0]:
            raise ValueError("one weight per point required")
        if np.any(w < 0.0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to one")
        if np.any(pts < 0.0):
            raise ValueError("points must be componentwise nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def expect(self, f: Integrand) -> float:
        return float(np.dot(self.weights, f(self.points)))

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"v_{i + 1}" for i in range(self.n)] + ["weight"])
            for row, wt in zip(self.points, self.weights):
                w.writerow([repr(float(v)) for v in row] + [repr(float(wt))])

    @classmethod
    def read_csv(cls, path: str | Path) -> "DiscreteDistribution":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, :-1], data[:, -1])


@dataclass(frozen=True)
class CurveDistribution:
    partition: tuple[tuple[int, ...], ...]
    alphas: tuple[float, ...]
    betas: tuple[float, ...]
    item_shares: tuple[float, ...]
    shift_at: float = math.inf
    shift: float = 0.0
    owner: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        owner = [0] * len(self.item_shares)
        for k, block in enumerate(self.partition):
            for i in block:
                owner[i] = k
        object.__setattr__(self, "owner", tuple(owner))

    @classmethod
    def from_solution(cls, sol: SaddleSolution) -> "CurveDistribution":
        return cls(
            partition=sol.partition,
            alphas=tuple(b.alpha for b in sol.bundles),
            betas=tuple(b.beta for b in sol.bundles),
            item_shares=sol.item_shares,
        )

    @property
    def n(self) -> int:
        return len(self.item_shares)

    @property
    def ells(self) -> tuple[float, ...]:
        return tuple(b / a for a, b in zip(self.alphas, self.betas))

    @property
    def jump_at(self) -> float:
        """Driver value where the shift switches on (inf when unshifted)."""
        return self.shift_at - self.shift if self.shift > 0.0 else math.inf

    def cap_point(self, k: int) -> float:
        """Smallest driver value at which bundle ``k`` is capped."""
        ell = self.ells[k]
        if ell <= self.jump_at:
            return ell
        return max(ell - self.shift, self.jump_at)

    @property
    def top(self) -> float:
        return max(self.cap_point(k) for k in range(len(self.partition)))

    def kinks(self) -> list[float]:
        pts = {1.0, self.top}
        pts.update(self.cap_point(k) for k in range(len(self.partition)))
        if math.isfinite(self.jump_at) and self.jump_at < self.top:
            pts.add(self.jump_at)
        return sorted(p for p in pts if 1.0 <= p <= self.top)

    def driver(self, x: np.ndarray, shifted: bool | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.shift == 0.0:
            return x
        if shifted is None:
            return np.where(x > self.jump_at, x + self.shift, x)
        return x + self.shift if shifted else x

    def bundle_values(self, x, shifted: bool | None = None) -> np.ndarray:
        """Bundle totals ``min(alpha_K*y, beta_K)``, shape ``(len(x), |K|)``."""
        y = self.driver(np.atleast_1d(x), shifted)[:, None]
        return np.minimum(np.asarray(self.alphas)[None, :] * y, np.asarray(self.betas)[None, :])

    def values(self, x, shifted: bool | None = None) -> np.ndarray:
        """Item values along the curve, shape ``(len(x), n)``."""
        totals = self.bundle_values(x, shifted)
        return totals[:, list(self.owner)] * np.asarray(self.item_shares)[None, :]

    def top_point(self) -> np.ndarray:
        return np.asarray(self.betas)[list(self.owner)] * np.asarray(self.item_shares)

    def atom_mass(self) -> float:
        return 1.0 / self.top

    def survival(self, x) -> np.ndarray:
        return 1.0 / np.asarray(x, dtype=float)

    def to_dict(self) -> dict:
        return {
            "partition": [list(b) for b in self.partition],
            "alphas": list(self.alphas),
            "betas": list(self.betas),
            "item_shares": list(self.item_shares),
            "shift_at": None if math.isinf(self.shift_at) else self.shift_at,
            "shift": self.shift,
        }

    def bin_means(self, edges: np.ndarray) -> np.ndarray:
        """Conditional mean of every item over driver bins ``edges[j]..edges[j+1]``.

        Closed form: each coordinate is ``min(a*x + b, c)`` on each side of the
        shift, integrated against ``dx/x^2``.
        """
        lo, hi = edges[:-1], edges[1:]
        mass = 1.0 / lo - 1.0 / hi
        out = np.empty((len(lo), self.n))
        for i in range(self.n):
            k = self.owner[i]
            a, c = self.alphas[k], self.betas[k]
            jump = self.jump_at
            left = _capped_linear_integral(a, 0.0, c, lo, np.minimum(hi, jump))
            right = _capped_linear_integral(a, a * self.shift, c, np.maximum(lo, jump), hi) if math.isfinite(jump) else 0.0
            out[:, i] = self.item_shares[i] * (left + right) / mass
        return out


def _capped_linear_integral(a: float, b: float, c: float, xa, xb) -> np.ndarray:
    """``int_xa^xb min(a*x + b, c) / x^2 dx``, zero where ``xb <= xa``."""
    xa = np.asarray(xa, dtype=float)
    xb = np.asarray(xb, dtype=float)
    valid = xb > xa
    xa_ = np.where(valid, xa, 1.0)
    xb_ = np.where(valid, xb, 1.0)
    kink = (c - b) / a
    lin_hi = np.clip(kink, xa_, xb_)
    linear = a * np.log(lin_hi / xa_) + b * (1.0 / xa_ - 1.0 / lin_hi)
    capped = c * (1.0 / lin_hi - 1.0 / xb_)
    return np.where(valid, linear + capped, 0.0)


def expect_curve(dist: CurveDistribution, f: Integrand, tol: float = EXPECT_TOL) -> float:
    """``E f(V)`` under the curve distribution.

    With ``u = 1/x`` the Pareto measure ``dx/x^2`` becomes Lebesgue on
    ``[1/top, 1]``; panels are split at every kink and at the shift so each
    one sees a smooth integrand.  The tail beyond ``top`` contributes
    ``f(V(top)) / top``.
    """
    kinks = dist.kinks()
    total = 0.0
    pieces = []
    for lo, hi in zip(kinks[:-1], kinks[1:]):
        shifted = None
        if dist.shift > 0.0:
            shifted = 0.5 * (lo + hi) > dist.jump_at
        pieces.append(
            piecewise_simpson(
                lambda u, s=shifted: f(dist.values(1.0 / u, s)),
                [1.0 / hi, 1.0 / lo],
                tol / max(1, len(kinks) - 1),
            )
        )
    total = math.fsum(pieces)
    top_val = f(dist.top_point()[None, :])[0]
    return total + float(top_val) * dist.atom_mass()


def sample_curve(dist: CurveDistribution, count: int, seed: int) -> DiscreteDistribution:
    """Monte Carlo draw of ``count`` values by inverse-cdf sampling."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    u = rng.random(count)
    x = 1.0 / (1.0 - u)
    return DiscreteDistribution(dist.values(x), np.full(count, 1.0 / count))


def sample_drivers(count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return 1.0 / (1.0 - rng.random(count))


def posted_price_revenue(dist: CurveDistribution, bundle: int, p: float) -> float:
    """``p * Prob(bundle total >= p)`` in closed form for an unshifted curve."""
    alpha, beta = dist.alphas[bundle], dist.betas[bundle]
    if p <= 0.0:
        return 0.0
    if p > beta:
        return 0.0
    return p * min(1.0, alpha / p)


def discretize(dist: CurveDistribution, bins: int = 10_000) -> DiscreteDistribution:
    """Equal-mass quantile bins of the driver plus the top atom.

    Each bin is replaced by its conditional mean, so item means are kept
    exactly and dispersion loses only the within-bin spread.
    """
    top = dist.top
    body = 1.0 - 1.0 / top
    u = np.linspace(0.0, body, bins + 1)
    edges = 1.0 / (1.0 - u)
    edges[-1] = top
    extra = [float(k) for k in dist.kinks() if 1.0 < k < top]
    if extra:
        edges = np.unique(np.concatenate([edges, extra]))
    mass = 1.0 / edges[:-1] - 1.0 / edges[1:]
    pts = dist.bin_means(edges)
    points = np.vstack([pts, dist.top_point()[None, :]])
    weights = np.concatenate([mass, [1.0 / top]])
    weights = weights / weights.sum()
    return DiscreteDistribution(points, weights)


def write_support_csv(dist: CurveDistribution, path: str | Path, samples: int = 401) -> None:
    """Support locus ``(x, v_1..v_n)`` on a log-spaced driver grid."""
    xs = np.unique(np.concatenate([np.geomspace(1.0, dist.top * 1.25, samples), dist.kinks()]))
    vals = dist.values(xs)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + [f"v_{i + 1}" for i in range(dist.n)])
        for x, row in zip(xs, vals):
            w.writerow([f"{x:.12g}"] + [f"{v:.12g}" for v in row])


def bundle_mean(dist: CurveDistribution, items: Sequence[int]) -> float:
    idx = list(items)
    return expect_curve(dist, lambda v: v[:, idx].sum(axis=1))
