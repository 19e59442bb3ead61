"""Saddle-point certification.

Seller side: under the worst case, the envelope reduction bounds the revenue
of *every* incentive-compatible mechanism by integrating the positive part of
the virtual values; posted-price and grid-lottery families give explicit
witnesses.  Nature side: revenue of the robust mechanism is evaluated on
LP-generated and structured deviations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .adversary import Infeasible, lp_feasible_distribution, random_support, trial_seeds
from .mechanism import DirectMechanism, lagrangian, revenue
from .quadrature import piecewise_simpson
from .worst_case import CurveDistribution, DiscreteDistribution, expect_curve

SELLER_TOL = 1e-8
NATURE_TOL = 1e-6
PRICE_STEP = 1e-3
TIE_TOL = 1e-12


class MenuFamily(str, enum.Enum):
    DETERMINISTIC_BUNDLE_PRICES = "DeterministicBundlePrices"
    DETERMINISTIC_ITEM_PRICES = "DeterministicItemPrices"
    RANDOMIZED_GRID_MENUS = "RandomizedGridMenus"


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    bound: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": self.value, "bound": self.bound, "detail": self.detail}


@dataclass
class SaddleReport:
    guarantee: float
    seller_best_deviation_value: float = -math.inf
    nature_worst_value_found: float = math.inf
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, value: float, bound: float, detail: str = "") -> Check:
        c = Check(name, bool(passed), float(value), float(bound), detail)
        self.checks.append(c)
        return c

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "guarantee": self.guarantee,
            "seller_best_deviation_value": self.seller_best_deviation_value,
            "nature_worst_value_found": self.nature_worst_value_found,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }


# -- virtual values ------------------------------------------------------------


@dataclass(frozen=True)
class VirtualValueProfile:
    grid: np.ndarray
    values: np.ndarray  # shape (len(grid), n)


def _value_slopes(dist: CurveDistribution, x: np.ndarray) -> np.ndarray:
    y = dist.driver(x)[:, None]
    alphas = np.asarray(dist.alphas)[list(dist.owner)]
    betas = np.asarray(dist.betas)[list(dist.owner)]
    slope = np.where(alphas[None, :] * y < betas[None, :], alphas[None, :], 0.0)
    return slope * np.asarray(dist.item_shares)[None, :]


def virtual_values(dist: CurveDistribution, x) -> np.ndarray:
    """``J_i(x) = V_i(x) - V_i'(x) * x`` (the Pareto inverse hazard rate is ``x``)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return dist.values(x) - _value_slopes(dist, x) * x[:, None]


def virtual_value_profile(dist: CurveDistribution, grid) -> VirtualValueProfile:
    grid = np.asarray(grid, dtype=float)
    return VirtualValueProfile(grid, virtual_values(dist, grid))


def seller_bound_under_fstar(dist: CurveDistribution, tol: float = 1e-12) -> float:
    """Revenue bound over all IC mechanisms: ``sum_i int max(J_i, 0) dH``."""
    kinks = dist.kinks()
    body = piecewise_simpson(
        lambda u: np.maximum(virtual_values(dist, 1.0 / u), 0.0).sum(axis=1),
        [1.0 / k for k in kinks],
        tol,
    )
    tail_x = np.array([dist.top * (1.0 + 1e-9)])
    tail = float(np.maximum(virtual_values(dist, tail_x), 0.0).sum()) / dist.top
    return body + tail


# -- seller sweeps -------------------------------------------------------------


def _total_survival_curve(dist: CurveDistribution, items: Sequence[int], prices: np.ndarray) -> np.ndarray:
    """``P(sum_{i in items} V_i >= p)`` by bisection on the monotone bundle total."""
    idx = list(items)
    total = lambda x: dist.values(x)[:, idx].sum(axis=1)
    top = dist.top
    hi_val = float(total(np.array([top * (1.0 + 1e-12)]))[0])
    lo_val = float(total(np.array([1.0]))[0])
    out = np.zeros_like(prices)
    out[prices <= lo_val] = 1.0
    mid_mask = (prices > lo_val) & (prices <= hi_val)
    p = prices[mid_mask]
    lo = np.ones_like(p)
    hi = np.full_like(p, top * (1.0 + 1e-12))
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        ok = total(mid) >= p
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    out[mid_mask] = 1.0 / hi
    return out


def _total_survival_discrete(dist: DiscreteDistribution, items: Sequence[int], prices: np.ndarray) -> np.ndarray:
    totals = dist.points[:, list(items)].sum(axis=1)
    order = np.argsort(totals)
    t_sorted = totals[order]
    tail = np.concatenate([np.cumsum(dist.weights[order][::-1])[::-1], [0.0]])
    pos = np.searchsorted(t_sorted, prices, side="left")
    return tail[pos]


def total_survival(dist, items: Sequence[int], prices) -> np.ndarray:
    prices = np.atleast_1d(np.asarray(prices, dtype=float))
    if isinstance(dist, CurveDistribution):
        return _total_survival_curve(dist, items, prices)
    return _total_survival_discrete(dist, items, prices)


def candidate_prices(dist, items: Sequence[int], step: float = PRICE_STEP) -> np.ndarray:
    """Uniform grid from 0 to 1.2x the largest total, plus every breakpoint."""
    idx = list(items)
    if isinstance(dist, CurveDistribution):
        ks = np.asarray(dist.kinks())
        extra = [dist.values(ks, False)[:, idx].sum(axis=1)]
        if dist.shift > 0.0:
            extra.append(dist.values(ks, True)[:, idx].sum(axis=1))
        extra = np.concatenate(extra)
        hi = float(dist.top_point()[idx].sum())
    else:
        extra = dist.points[:, idx].sum(axis=1)
        hi = float(extra.max())
    grid = np.arange(0.0, 1.2 * hi + step, step)
    return np.unique(np.concatenate([grid, extra]))


@dataclass(frozen=True)
class SweepResult:
    family: MenuFamily
    value: float
    prices: tuple[float, ...]
    bundles: tuple[tuple[int, ...], ...]


def best_posted_price(dist, items: Sequence[int], step: float = PRICE_STEP) -> tuple[float, float]:
    """``max_p p * P(total >= p)``; ties go to the smallest price."""
    prices = candidate_prices(dist, items, step)
    rev = prices * total_survival(dist, items, prices)
    top = float(rev.max())
    # ties within rounding go to the smallest price
    j = int(np.flatnonzero(rev >= top - TIE_TOL * max(1.0, abs(top)))[0])
    return top, float(prices[j])


def _grid_lottery_value(dist, items: Sequence[int], step: float) -> tuple[float, float]:
    prices = candidate_prices(dist, items, step)
    rev = prices * total_survival(dist, items, prices)
    # coarse support for the lotteries: 48 evenly spaced candidates plus the argmax
    pick = np.unique(np.concatenate([np.linspace(0, len(prices) - 1, 48).astype(int), [int(np.argmax(rev))]]))
    r = rev[pick]
    best, arg = -math.inf, 0.0
    for w in (0.25, 0.5, 0.75):
        mix = w * r[:, None] + (1.0 - w) * r[None, :]
        k = int(np.argmax(mix))
        if mix.flat[k] > best:
            best = float(mix.flat[k])
            arg = float(prices[pick][k // len(pick)])
    return best, arg


def seller_menu_sweep(
    dist,
    family: MenuFamily | str,
    bundles: Sequence[Sequence[int]] | None = None,
    step: float = PRICE_STEP,
) -> SweepResult:
    """Best revenue within a structured family of bundled posted-price menus.

    ``DeterministicBundlePrices`` sells each block of ``bundles`` (default: the
    grand bundle) at its own price; ``DeterministicItemPrices`` is the same
    with singleton blocks; ``RandomizedGridMenus`` randomises each block's
    price over mixtures of grid prices.
    """
    family = MenuFamily(family)
    n = dist.n
    if family is MenuFamily.DETERMINISTIC_ITEM_PRICES:
        blocks = [(i,) for i in range(n)]
    elif bundles is None:
        blocks = [tuple(range(n))]
    else:
        blocks = [tuple(b) for b in bundles]
    values, prices = [], []
    for block in blocks:
        if family is MenuFamily.RANDOMIZED_GRID_MENUS:
            v, p = _grid_lottery_value(dist, block, step)
        else:
            v, p = best_posted_price(dist, block, step)
        values.append(v)
        prices.append(p)
    return SweepResult(family, math.fsum(values), tuple(prices), tuple(blocks))


# -- nature sweep --------------------------------------------------------------


@dataclass
class NatureSweep:
    min_revenue: float
    trials: int
    feasible: int
    structured: list[tuple[str, float]]
    passed: bool


def nature_sweep(
    mech: DirectMechanism,
    sol,
    curve: CurveDistribution,
    trials: int,
    seed: int,
    structured: Iterable[tuple[str, DiscreteDistribution]] = (),
    caps: Sequence[float] | None = None,
    points: int = 30,
    tol: float = NATURE_TOL,
) -> NatureSweep:
    """Minimum revenue of ``mech`` over LP-feasible and structured deviations."""
    worst = math.inf
    feasible = 0
    for ss in trial_seeds(seed, trials):
        support = random_support(curve, sol.chosen_m, points, ss, caps=caps)
        dist = lp_feasible_distribution(sol, support, caps=caps)
        if isinstance(dist, Infeasible):
            continue
        feasible += 1
        worst = min(worst, revenue(mech, dist))
    named = []
    for name, dist in structured:
        r = revenue(mech, dist)
        named.append((name, r))
        worst = min(worst, r)
    ok = worst >= sol.guarantee - tol if math.isfinite(worst) else True
    return NatureSweep(worst, trials, feasible, named, ok)


# -- Lagrangian certificate ----------------------------------------------------


@dataclass(frozen=True)
class LagrangianCertificate:
    linearity_residual: float
    convexity_violation: float
    tests: int


def lagrangian_certificate(
    mech: DirectMechanism, curve: CurveDistribution, tests: int = 1000, seed: int = 0
) -> LagrangianCertificate:
    """Midpoint tests of the Lagrangian: affine on the worst-case support, convex everywhere.

    Support pairs are drawn from the curve body plus the top point; the global
    test uses uniform points in a box 1.5x beyond the top point.
    """
    rng = np.random.default_rng(seed)
    xs = np.minimum(1.0 / (1.0 - rng.random((tests, 2))), curve.top)
    a = curve.values(xs[:, 0])
    b = curve.values(xs[:, 1])
    mid = lagrangian(mech, 0.5 * (a + b))
    lin = float(np.max(np.abs(mid - 0.5 * (lagrangian(mech, a) + lagrangian(mech, b)))))
    hi = 1.5 * curve.top_point()
    u = rng.random((tests, curve.n)) * hi
    w = rng.random((tests, curve.n)) * hi
    gap = lagrangian(mech, 0.5 * (u + w)) - 0.5 * (lagrangian(mech, u) + lagrangian(mech, w))
    return LagrangianCertificate(lin, float(max(0.0, gap.max())), tests)


# -- full certificate ----------------------------------------------------------


def moment_checks(report: SaddleReport, curve: CurveDistribution, sol, dispersions: bool, tol: float) -> None:
    worst_mean = 0.0
    for i, m in enumerate(sol.chosen_m):
        worst_mean = max(worst_mean, abs(expect_curve(curve, lambda v, i=i: v[:, i]) - m))
    worst_disp = 0.0
    if dispersions:
        for block, phi, s in zip(sol.partition, sol.kernels, sol.chosen_s):
            idx = list(block)
            m_k = math.fsum(sol.chosen_m[i] for i in idx)
            got = expect_curve(curve, lambda v: phi(v[:, idx].sum(axis=1) - m_k))
            worst_disp = max(worst_disp, abs(got - s))
    worst = max(worst_mean, worst_disp)
    report.add("moment_residual", worst <= tol, worst, tol, f"mean {worst_mean:.3e}, dispersion {worst_disp:.3e}")


def seller_checks(report: SaddleReport, curve: CurveDistribution, partition, tol: float = SELLER_TOL) -> None:
    g = report.guarantee
    bound = seller_bound_under_fstar(curve)
    report.add("envelope_bound", abs(bound - g) <= 1e-9 and bound <= g + tol, bound, g + tol)
    best = bound
    sweeps = [
        seller_menu_sweep(curve, MenuFamily.DETERMINISTIC_BUNDLE_PRICES),
        seller_menu_sweep(curve, MenuFamily.DETERMINISTIC_BUNDLE_PRICES, bundles=partition),
        seller_menu_sweep(curve, MenuFamily.DETERMINISTIC_ITEM_PRICES),
        seller_menu_sweep(curve, MenuFamily.RANDOMIZED_GRID_MENUS, bundles=partition),
    ]
    for sw in sweeps:
        label = f"seller_{sw.family.value}_{len(sw.bundles)}blocks"
        report.add(label, sw.value <= g + tol, sw.value, g + tol)
        best = max(best, sw.value)
    report.seller_best_deviation_value = best


def certify(
    sol,
    curve: CurveDistribution,
    mech: DirectMechanism,
    trials: int = 100,
    seed: int = 0,
    structured: Iterable[tuple[str, DiscreteDistribution]] = (),
    caps: Sequence[float] | None = None,
    moment_tol: float = 1e-8,
    seller_tol: float = SELLER_TOL,
    nature_tol: float = NATURE_TOL,
) -> SaddleReport:
    report = SaddleReport(guarantee=sol.guarantee)
    moment_checks(report, curve, sol, dispersions=caps is None, tol=moment_tol)
    r_star = revenue(mech, curve)
    report.add("revenue_identity", abs(r_star - sol.guarantee) <= 1e-8, r_star, sol.guarantee)
    seller_checks(report, curve, sol.partition, seller_tol)
    if caps is None:
        lc = lagrangian_certificate(mech, curve, seed=seed)
        report.add("lagrangian_linearity", lc.linearity_residual <= 1e-9, lc.linearity_residual, 1e-9)
        report.add("lagrangian_convexity", lc.convexity_violation <= 1e-9, lc.convexity_violation, 1e-9)
    ns = nature_sweep(mech, sol, curve, trials, seed, structured, caps=caps, tol=nature_tol)
    report.nature_worst_value_found = ns.min_revenue
    report.add(
        "nature_sweep",
        ns.passed,
        ns.min_revenue,
        sol.guarantee - nature_tol,
        f"{ns.feasible}/{ns.trials} LP trials feasible; structured: "
        + ", ".join(f"{n}={v:.10g}" for n, v in ns.structured),
    )
    return report


# -- counterexample gaps -------------------------------------------------------

PROP2_EPSILONS = (1e-2, 1e-3, 1e-4, 1e-5)


@dataclass(frozen=True)
class BundlingGap:
    epsilon: float
    best_value: float
    best_price: float
    gap: float
    limit: float
    moment_residual: float


def bundling_gap(sol, epsilon: float, ell: float | None = None) -> BundlingGap:
    """Best grand-bundle posted price under the flattened perturbation.

    Posted prices are optimal among all mechanisms for a one-dimensional
    total, so the gap to the guarantee bounds every pure-bundling menu.
    """
    from .adversary import prop2_distribution

    res = prop2_distribution(sol, epsilon, ell=ell)
    value, price = best_posted_price(res.curve, tuple(range(res.curve.n)))
    worst = 0.0
    for i, m in enumerate(sol.chosen_m):
        worst = max(worst, abs(expect_curve(res.curve, lambda v, i=i: v[:, i]) - m))
    for i, (phi, s) in enumerate(zip(sol.kernels, sol.chosen_s)):
        got = expect_curve(res.curve, lambda v, i=i, phi=phi: phi(v[:, i] - sol.chosen_m[i]))
        worst = max(worst, abs(got - s))
    return BundlingGap(epsilon, value, price, sol.guarantee - value, res.guarantee_limit, worst)


def search_bundling_gap(sol, epsilons: Sequence[float] = PROP2_EPSILONS, min_gap: float = 1e-6) -> BundlingGap:
    """First ``epsilon`` whose bundling gap exceeds ``min_gap`` (else the last tried)."""
    last = None
    for eps in epsilons:
        last = bundling_gap(sol, eps)
        if last.gap > min_gap:
            return last
    return last


@dataclass(frozen=True)
class SeparateSalesGap:
    epsilon: float
    best_value: float
    item_prices: tuple[float, ...]
    gap: float
    bundling_revenue: float


def separate_sales_gap(sol, mech: DirectMechanism, epsilon: float = 0.01) -> SeparateSalesGap:
    """Best item-by-item posted prices under the corner transfer of the grand-bundle worst case."""
    from .adversary import prop3_distribution

    dist = prop3_distribution(CurveDistribution.from_solution(sol), epsilon)
    sw = seller_menu_sweep(dist, MenuFamily.DETERMINISTIC_ITEM_PRICES)
    return SeparateSalesGap(epsilon, sw.value, sw.prices, sol.guarantee - sw.value, revenue(mech, dist))
