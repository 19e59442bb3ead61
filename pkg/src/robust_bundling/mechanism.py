"""The bundled random-price mechanism and its direct (q, t) form.

Bundle ``K`` is offered at an independent random price with density

    g_K(p) = lam_K * (phi'(beta_K - m_K) - phi'(p - m_K)) / p,   p in [alpha_K, beta_K].

The domain-cap variant has no kernel; its density is ``lam_K / p`` with
``lam_K = 1/log(beta_K/alpha_K)``.  Both share every closed form below, with
the kernel bracket replaced by the constant 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .dispersion import DispersionFunction, deriv, eval_phi, shifted_coefficients
from .saddle_core import SaddleSolution
from .worst_case import CurveDistribution, DiscreteDistribution, expect_curve

TABLE_POINTS = 2048
LAMBDA_TOL = 1e-8


@dataclass(frozen=True)
class MenuBundle:
    alpha: float
    beta: float
    lam: float
    m: float
    phi: DispersionFunction | None = None

    @property
    def top_slope(self) -> float:
        return 1.0 if self.phi is None else float(deriv(self.phi, self.beta - self.m, 1))

    def density(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        inside = (p >= self.alpha) & (p <= self.beta)
        safe = np.where(inside, p, 1.0)
        if self.phi is None:
            num = np.ones_like(safe)
        else:
            num = self.top_slope - deriv(self.phi, safe - self.m, 1)
        return np.where(inside, self.lam * num / safe, 0.0)

    def _antiderivative(self, w) -> np.ndarray:
        """Antiderivative of the unnormalised density bracket / p."""
        w = np.asarray(w, dtype=float)
        if self.phi is None:
            return np.log(w)
        c = np.polynomial.Polynomial(shifted_coefficients(self.phi, self.m)).deriv().coef
        out = (self.top_slope - c[0]) * np.log(w)
        for j in range(1, len(c)):
            out = out - c[j] * w**j / j
        return out

    def cdf(self, w) -> np.ndarray:
        """Exact ``G_K(w)``."""
        w = np.asarray(w, dtype=float)
        wc = np.clip(w, self.alpha, self.beta)
        val = self.lam * (self._antiderivative(wc) - self._antiderivative(self.alpha))
        return np.where(w < self.alpha, 0.0, np.where(w >= self.beta, 1.0, np.clip(val, 0.0, 1.0)))

    def payment(self, w) -> np.ndarray:
        """Expected payment ``int_{p<=w} p dG(p)`` as a function of the bundle total."""
        w = np.asarray(w, dtype=float)
        wc = np.clip(w, self.alpha, self.beta)
        if self.phi is None:
            val = self.lam * (wc - self.alpha)
        else:
            val = self.lam * (
                self.top_slope * (wc - self.alpha) - eval_phi(self.phi, wc - self.m) + eval_phi(self.phi, self.alpha - self.m)
            )
        return np.where(w < self.alpha, 0.0, val)

    def penalty(self, w) -> np.ndarray:
        if self.phi is None:
            return np.zeros_like(np.asarray(w, dtype=float))
        return self.lam * eval_phi(self.phi, np.asarray(w, dtype=float) - self.m)

    def normaliser(self) -> float:
        """``lam`` recomputed from the antiderivative (independent of the solver)."""
        mass = float(self._antiderivative(self.beta) - self._antiderivative(self.alpha))
        return 1.0 / mass


@dataclass(frozen=True)
class RandomPriceMenu:
    partition: tuple[tuple[int, ...], ...]
    bundles: tuple[MenuBundle, ...]
    tables: tuple[CubicHermiteSpline, ...] = field(repr=False, compare=False, default=())

    def __post_init__(self) -> None:
        if not self.tables:
            tabs = []
            for b in self.bundles:
                grid = np.linspace(b.alpha, b.beta, TABLE_POINTS)
                # exact slopes keep the Hermite table monotone and O(h^4) accurate
                tabs.append(CubicHermiteSpline(grid, b.cdf(grid), b.density(grid)))
            object.__setattr__(self, "tables", tuple(tabs))

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.partition)

    def density(self, k: int, p) -> np.ndarray:
        return self.bundles[k].density(p)

    def tabulated_cdf(self, k: int, w) -> np.ndarray:
        b = self.bundles[k]
        w = np.asarray(w, dtype=float)
        inner = np.clip(self.tables[k](np.clip(w, b.alpha, b.beta)), 0.0, 1.0)
        return np.where(w < b.alpha, 0.0, np.where(w >= b.beta, 1.0, inner))

    def write_density_csv(self, path: str | Path, samples: int = 201) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bundle", "p", "g"])
            for k, b in enumerate(self.bundles):
                ps = np.linspace(b.alpha, b.beta, samples)
                for p, g in zip(ps, b.density(ps)):
                    w.writerow([k, f"{p:.12g}", f"{g:.12g}"])


def build_menu(sol: SaddleSolution, strict: bool = True) -> RandomPriceMenu:
    """Menu from a solved instance; ``strict`` rejects a stored ``lam`` that
    disagrees with the closed-form normaliser."""
    bundles = []
    for b, phi in zip(sol.bundles, sol.kernels):
        mb = MenuBundle(alpha=b.alpha, beta=b.beta, lam=b.lam, m=b.m, phi=phi)
        lam = mb.normaliser()
        if strict and abs(lam - b.lam) > LAMBDA_TOL * max(1.0, abs(lam)):
            raise ValueError(f"normaliser mismatch: solver {b.lam!r} vs closed form {lam!r}")
        bundles.append(mb)
    return RandomPriceMenu(sol.partition, tuple(bundles))


class DirectMechanism:
    """Allocation ``q_i(v) = G_K(sum_{j in K} v_j)`` and payment ``t(v)``."""

    def __init__(self, menu: RandomPriceMenu):
        self.menu = menu
        owner = [0] * menu.n
        for k, block in enumerate(menu.partition):
            for i in block:
                owner[i] = k
        self.owner = owner

    @property
    def n(self) -> int:
        return self.menu.n

    def bundle_totals(self, v) -> np.ndarray:
        v = np.atleast_2d(np.asarray(v, dtype=float))
        return np.stack([v[:, list(block)].sum(axis=1) for block in self.menu.partition], axis=1)

    def allocation(self, v) -> np.ndarray:
        w = self.bundle_totals(v)
        g = np.stack([self.menu.tabulated_cdf(k, w[:, k]) for k in range(w.shape[1])], axis=1)
        return g[:, self.owner]

    def payment(self, v) -> np.ndarray:
        w = self.bundle_totals(v)
        return sum(b.payment(w[:, k]) for k, b in enumerate(self.menu.bundles))

    def utility(self, v, report=None) -> np.ndarray:
        v = np.atleast_2d(np.asarray(v, dtype=float))
        r = v if report is None else np.atleast_2d(np.asarray(report, dtype=float))
        return np.sum(v * self.allocation(r), axis=1) - self.payment(r)

    def max_payment(self) -> float:
        return math.fsum(float(b.payment(b.beta)) for b in self.menu.bundles)

    def write_revenue_surface_csv(self, path: str | Path, samples: int = 81) -> None:
        if self.n != 2:
            raise ValueError("revenue surface is only defined for two items")
        hi = 1.2 * max(b.beta for b in self.menu.bundles)
        grid = np.linspace(0.0, hi, samples)
        v1, v2 = np.meshgrid(grid, grid, indexing="ij")
        pts = np.column_stack([v1.ravel(), v2.ravel()])
        t = self.payment(pts)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["v_1", "v_2", "t"])
            for (a, b), val in zip(pts, t):
                w.writerow([f"{a:.12g}", f"{b:.12g}", f"{val:.12g}"])


def payment(mech: DirectMechanism, v) -> np.ndarray:
    return mech.payment(v)


def revenue(mech: DirectMechanism, dist: CurveDistribution | DiscreteDistribution) -> float:
    if isinstance(dist, CurveDistribution):
        return expect_curve(dist, mech.payment)
    return dist.expect(mech.payment)


def lagrangian(mech: DirectMechanism, v) -> np.ndarray:
    """Payment plus the lambda-weighted dispersion penalty of every bundle."""
    w = mech.bundle_totals(v)
    pen = sum(b.penalty(w[:, k]) for k, b in enumerate(mech.menu.bundles))
    return mech.payment(v) + pen


def mechanism_for(sol: SaddleSolution, strict: bool = True) -> DirectMechanism:
    return DirectMechanism(build_menu(sol, strict))


def bundle_totals_of(partition: Sequence[Sequence[int]], v) -> np.ndarray:
    v = np.atleast_2d(np.asarray(v, dtype=float))
    return np.stack([v[:, list(b)].sum(axis=1) for b in partition], axis=1)
