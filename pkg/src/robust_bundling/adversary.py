"""Nature-side deviations inside the ambiguity set.

Three generators:

* the corner transfer, which moves mass from the top of a pure-bundling
  worst case onto the axes without touching the bundle total;
* the flattened-Pareto perturbation, which re-solves the item moment
  equations under a driver shifted by ``eps`` beyond ``ell - eps``;
* a phase-1 LP that reweights an arbitrary finite support to hit the
  moments exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dispersion import DispersionFunction, deriv, eval_phi
from .errors import EpsilonTooLarge, HypothesisViolated, NewtonDivergence
from .quadrature import gauss_legendre
from .saddle_core import SaddleSolution
from .simplex import phase_one
from .worst_case import CurveDistribution, DiscreteDistribution, discretize, expect_curve

DEFAULT_BINS = 10_000


# -- corner transfer -----------------------------------------------------------


def prop3_distribution(dist: CurveDistribution, epsilon: float, bins: int = DEFAULT_BINS) -> DiscreteDistribution:
    """Move mass ``epsilon`` from the top atom to the axis corners ``beta*e_i``.

    Corner ``i`` receives ``gamma_i * epsilon`` so item means stay put, and
    every moved point still has total ``beta``.
    """
    if len(dist.partition) != 1:
        raise ValueError("corner transfer needs the grand-bundle worst case")
    atom = dist.atom_mass()
    if epsilon < 0.0 or epsilon >= atom:
        raise EpsilonTooLarge(f"epsilon={epsilon} must lie in [0, {atom})")
    base = discretize(dist, bins)
    if epsilon == 0.0:
        return base
    beta = dist.betas[0]
    shares = np.asarray(dist.item_shares)
    weights = base.weights.copy()
    weights[-1] -= epsilon
    corners = beta * np.eye(dist.n)
    points = np.vstack([base.points, corners])
    weights = np.concatenate([weights, shares * epsilon])
    return DiscreteDistribution(points, weights / weights.sum())


# -- flattened Pareto ----------------------------------------------------------


def flattened_cdf(x, ell: float, epsilon: float) -> np.ndarray:
    """``H_eps``: Pareto below ``ell - eps``, flat on the gap, shifted above."""
    x = np.asarray(x, dtype=float)
    H = lambda y: np.where(y >= 1.0, 1.0 - 1.0 / np.maximum(y, 1.0), 0.0)
    return np.where(x <= ell - epsilon, H(x), np.where(x < ell, H(ell - epsilon), H(x - epsilon)))


def _shifted_moments(
    alpha: float, top: float, m: float, phi: DispersionFunction, ell: float, eps: float
) -> tuple[float, float]:
    """Mean and dispersion of ``min(alpha*y, alpha*top)``, ``y ~ H_eps``, for ``top > ell``."""
    jump = ell - eps
    end = top - eps
    mean = alpha * (
        math.log(jump) + math.log(end / jump) + eps * (1.0 / jump - 1.0 / end) + top / end
    )
    lo = gauss_legendre(
        lambda t: eval_phi(phi, alpha * np.exp(t) - m) * np.exp(-t),
        0.0,
        math.log(jump),
        panels=max(1, int(2 * math.log(jump)) + 1),
    )
    hi = gauss_legendre(
        lambda t: eval_phi(phi, alpha * (np.exp(t) + eps) - m) * np.exp(-t),
        math.log(jump),
        math.log(end),
        panels=max(1, int(2 * math.log(end / jump)) + 1),
    )
    disp = lo + hi + eval_phi(phi, alpha * top - m) / end
    return mean, disp


@dataclass
class Prop2Result:
    curve: CurveDistribution
    discrete: DiscreteDistribution
    epsilon: float
    ell: float
    maximal: tuple[int, ...]
    alphas: tuple[float, ...]
    ells: tuple[float, ...]
    # sum_{i in I} alpha_i + sum_{i not in I} alpha_i * ell_i / ell, at the base point
    guarantee_limit: float
    residuals: dict[int, tuple[float, float]] = field(default_factory=dict)
    iterations: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "ell": self.ell,
            "maximal": list(self.maximal),
            "alphas": list(self.alphas),
            "ells": list(self.ells),
            "residuals": {str(k): list(v) for k, v in self.residuals.items()},
        }


def _maximal_set(ells: Sequence[float], rel: float = 1e-12) -> tuple[int, ...]:
    top = max(ells)
    return tuple(i for i, e in enumerate(ells) if e >= top * (1.0 - rel))


def default_shift_point(sol: SaddleSolution) -> float:
    ells = [b.ell for b in sol.bundles]
    maximal = _maximal_set(ells)
    rest = [e for i, e in enumerate(ells) if i not in maximal]
    return 0.5 * (max(rest) + max(ells))


def _newton(fun, x0: np.ndarray, tol: float, max_iter: int = 100) -> tuple[np.ndarray, int]:
    x = np.array(x0, dtype=float)
    r = fun(x)
    for it in range(max_iter):
        if np.max(np.abs(r)) <= tol:
            return x, it
        J = np.empty((2, 2))
        for j in range(2):
            h = 1e-7 * max(1.0, abs(x[j]))
            xp = x.copy()
            xp[j] += h
            xm = x.copy()
            xm[j] -= h
            J[:, j] = (fun(xp) - fun(xm)) / (2 * h)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise NewtonDivergence("singular Jacobian") from exc
        t = 1.0
        norm = np.max(np.abs(r))
        while t > 1e-6:
            cand = x + t * step
            try:
                rc = fun(cand)
            except (ValueError, OverflowError):
                rc = None
            if rc is not None and np.all(np.isfinite(rc)) and np.max(np.abs(rc)) < norm:
                x, r = cand, rc
                break
            t *= 0.5
        else:
            if norm <= 10 * tol:
                return x, it
            raise NewtonDivergence("line search failed")
    if np.max(np.abs(r)) <= tol:
        return x, max_iter
    raise NewtonDivergence(f"no convergence after {max_iter} iterations")


def solve_flattened(
    alpha: float, ell_i: float, m: float, s: float, phi: DispersionFunction, ell: float, eps: float
) -> tuple[float, float, int, tuple[float, float]]:
    """Re-solve one item's ``(alpha, top)`` under ``H_eps``, seeded at the base pair."""

    def fun(z):
        a, top = z
        if a <= 0.0 or top <= ell:
            raise ValueError("left the admissible region")
        mean, disp = _shifted_moments(a, top, m, phi, ell, eps)
        return np.array([mean - m, disp - s])

    z, its = _newton(fun, np.array([alpha, ell_i]), tol=1e-12 * max(1.0, m, s))
    res = fun(z)
    return float(z[0]), float(z[1]), its, (float(res[0]), float(res[1]))


def prop2_distribution(
    sol: SaddleSolution,
    epsilon: float,
    ell: float | None = None,
    bins: int = DEFAULT_BINS,
) -> Prop2Result:
    """Flattened-Pareto deviation against pure bundling (finest partition)."""
    if any(len(block) != 1 for block in sol.partition):
        raise ValueError("flattened perturbation needs the item-by-item (finest) partition")
    ells = [b.ell for b in sol.bundles]
    maximal = _maximal_set(ells)
    if len(maximal) == len(ells):
        raise HypothesisViolated("all beta_i/alpha_i coincide; the perturbation needs two distinct ratios")
    rest = max(e for i, e in enumerate(ells) if i not in maximal)
    top = max(ells)
    if ell is None:
        ell = 0.5 * (rest + top)
    if not (rest < ell < top):
        raise ValueError(f"ell={ell} must lie strictly between {rest} and {top}")
    if not (0.0 < epsilon < min(top - ell, ell - rest)):
        raise EpsilonTooLarge(f"epsilon={epsilon} must lie in (0, {min(top - ell, ell - rest)})")

    alphas = [b.alpha for b in sol.bundles]
    betas = [b.beta for b in sol.bundles]
    new_ells = list(ells)
    residuals: dict[int, tuple[float, float]] = {}
    iterations: dict[int, int] = {}
    for i in maximal:
        b = sol.bundles[i]
        a, t, its, res = solve_flattened(b.alpha, b.ell, b.m, b.s, sol.kernels[i], ell, epsilon)
        alphas[i], new_ells[i], betas[i] = a, t, a * t
        residuals[i] = res
        iterations[i] = its

    curve = CurveDistribution(
        partition=sol.partition,
        alphas=tuple(alphas),
        betas=tuple(betas),
        item_shares=tuple(1.0 for _ in alphas),
        shift_at=ell,
        shift=epsilon,
    )
    result = Prop2Result(
        curve=curve,
        discrete=discretize(curve, bins),
        epsilon=epsilon,
        ell=ell,
        maximal=maximal,
        alphas=tuple(alphas),
        ells=tuple(new_ells),
        guarantee_limit=math.fsum(
            b.alpha if i in maximal else b.alpha * b.ell / ell for i, b in enumerate(sol.bundles)
        ),
        residuals=residuals,
        iterations=iterations,
    )
    return result


@dataclass(frozen=True)
class FlattenedDerivative:
    item: int
    finite_difference: float
    implicit: float
    printed: float
    implicit_agrees: bool
    printed_agrees: bool


def flattened_alpha_derivative(
    sol: SaddleSolution, item: int, epsilon: float = 1e-4, ell: float | None = None, rel_tol: float = 1e-3
) -> FlattenedDerivative:
    """``d alpha_i^eps / d eps`` at 0: finite difference against two closed forms.

    ``implicit`` inverts the 2x2 Jacobian of the shifted moment equations
    directly; ``printed`` is the ratio
    ``-int_1^ell_i (phi'(a x - m) - phi'(a ell_i - m)) dH / int_1^ell_i (...) x dH``.
    """
    b = sol.bundles[item]
    phi = sol.kernels[item]
    if ell is None:
        ell = default_shift_point(sol)
    a_eps, _, _, _ = solve_flattened(b.alpha, b.ell, b.m, b.s, phi, ell, epsilon)
    a_2eps, _, _, _ = solve_flattened(b.alpha, b.ell, b.m, b.s, phi, ell, 2 * epsilon)
    # second-order one-sided difference
    fd = (-3.0 * b.alpha + 4.0 * a_eps - a_2eps) / (2.0 * epsilon)

    top = deriv(phi, b.alpha * b.ell - b.m, 1)
    log_ell = math.log(b.ell)
    panels = max(1, int(2 * log_ell) + 1)

    def gap_moment(power: int, start: float) -> float:
        # int_start^ell_i (phi'(a x - m) - top) x^power dx / x^2, via x = e^t
        return gauss_legendre(
            lambda t: (deriv(phi, b.alpha * np.exp(t) - b.m, 1) - top) * np.exp((power - 1) * t),
            math.log(start),
            log_ell,
            panels=panels,
        )

    printed = -gap_moment(0, 1.0) / gap_moment(1, 1.0)
    implicit = -b.alpha * gap_moment(0, ell) / gap_moment(1, 1.0)
    close = lambda u, v: abs(u - v) <= rel_tol * max(abs(u), abs(v))
    return FlattenedDerivative(
        item=item,
        finite_difference=fd,
        implicit=implicit,
        printed=printed,
        implicit_agrees=close(fd, implicit),
        printed_agrees=close(fd, printed),
    )


# -- LP reweighting ------------------------------------------------------------


@dataclass(frozen=True)
class Infeasible:
    objective: float


def moment_rows(
    support: np.ndarray,
    means: Sequence[float],
    partition: Sequence[Sequence[int]],
    kernels: Sequence[DispersionFunction | None],
    dispersions: Sequence[float | None],
) -> tuple[np.ndarray, np.ndarray]:
    """Equality rows ``[1; v_i; phi_K(sum_K v - m_K)]`` and their targets."""
    support = np.atleast_2d(np.asarray(support, dtype=float))
    rows = [np.ones(len(support))]
    rhs = [1.0]
    for i, m in enumerate(means):
        rows.append(support[:, i])
        rhs.append(float(m))
    for block, phi, s in zip(partition, kernels, dispersions):
        if phi is None:
            continue
        m_k = math.fsum(means[i] for i in block)
        rows.append(eval_phi(phi, support[:, list(block)].sum(axis=1) - m_k))
        rhs.append(float(s))
    return np.vstack(rows), np.asarray(rhs)


def lp_feasible_distribution(
    sol: SaddleSolution,
    support,
    caps: Sequence[float] | None = None,
) -> DiscreteDistribution | Infeasible:
    """Weights on ``support`` matching the solution's means and dispersions.

    With ``caps`` (domain variant) only mean rows are imposed and points whose
    bundle totals exceed a cap are dropped before solving.
    """
    pts = np.atleast_2d(np.asarray(support, dtype=float))
    if caps is not None:
        pts = filter_capped(pts, sol.partition, caps)
        kernels: list = [None] * len(sol.partition)
        disps: list = [None] * len(sol.partition)
    else:
        kernels, disps = list(sol.kernels), list(sol.chosen_s)
    if len(pts) == 0:
        return Infeasible(objective=math.inf)
    A, b = moment_rows(pts, sol.chosen_m, sol.partition, kernels, disps)
    res = phase_one(A, b)
    if not res.feasible or res.residual > 1e-9:
        return Infeasible(objective=res.objective)
    w = np.maximum(res.x, 0.0)
    keep = w > 0.0
    return DiscreteDistribution(pts[keep], w[keep] / w.sum())


def filter_capped(points: np.ndarray, partition, caps: Sequence[float]) -> np.ndarray:
    totals = np.stack([points[:, list(b)].sum(axis=1) for b in partition], axis=1)
    ok = np.all(totals <= np.asarray(caps)[None, :] * (1.0 + 1e-12), axis=1) & np.all(points >= 0.0, axis=1)
    return points[ok]


def random_support(
    dist: CurveDistribution,
    means: Sequence[float],
    count: int,
    seed: int | np.random.SeedSequence,
    spread: float = 0.35,
    caps: Sequence[float] | None = None,
) -> np.ndarray:
    """Random cloud of points around the worst-case curve.

    Curve points at Pareto draws get independent log-normal jitter; the mean
    vector and a far-out point are always included so the moment target has
    a fair chance of lying in the convex hull.
    """
    rng = np.random.default_rng(seed)
    x = 1.0 / (1.0 - rng.random(count - 2))
    base = dist.values(x)
    pts = base * np.exp(spread * rng.standard_normal(base.shape))
    far = dist.top_point() * (1.0 + rng.uniform(0.1, 0.6))
    out = np.vstack([pts, np.asarray(means, dtype=float)[None, :], far[None, :]])
    if caps is not None:
        totals = np.stack([out[:, list(b)].sum(axis=1) for b in dist.partition], axis=1)
        scale = np.max(totals / np.asarray(caps)[None, :], axis=1)
        out = out / np.maximum(scale, 1.0)[:, None]
    return out


def trial_seeds(seed: int, trials: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(trials)
