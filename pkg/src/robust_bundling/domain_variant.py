"""Ambiguity over means plus a cap on every bundle total.

Only the mean equation survives: ``alpha_K * (1 + log(vbar_K / alpha_K)) =
m_K``.  The price density becomes ``1 / (log(vbar/alpha) * p)`` and the
expected payment is linear in the bundle total.  Everything downstream runs
through the general curve, menu and verifier code with ``beta_K := vbar_K``
and no dispersion rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

from .errors import InvalidProblem, NonConvergence
from .mechanism import DirectMechanism, MenuBundle, RandomPriceMenu
from .verifier import SaddleReport, certify
from .worst_case import CurveDistribution

DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class DomainProblem:
    partition: tuple[tuple[int, ...], ...]
    means: tuple[float, ...]
    caps: tuple[float, ...]

    def __post_init__(self) -> None:
        partition = tuple(tuple(int(i) for i in b) for b in self.partition)
        means = tuple(float(m) for m in self.means)
        caps = tuple(float(c) for c in self.caps)
        n = len(means)
        flat = sorted(i for b in partition for i in b)
        if flat != list(range(n)) or any(len(b) == 0 for b in partition):
            raise InvalidProblem("partition: blocks must be disjoint, nonempty and cover every item")
        if any(not m > 0.0 for m in means):
            raise InvalidProblem("means: every mean must be strictly positive")
        if len(caps) != len(partition):
            raise InvalidProblem("caps: one cap per bundle required")
        for k, (b, c) in enumerate(zip(partition, caps)):
            if not math.fsum(means[i] for i in b) < c:
                raise InvalidProblem(f"caps[{k}]: bundle mean must lie strictly below the cap")
        object.__setattr__(self, "partition", partition)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "caps", caps)

    @property
    def n(self) -> int:
        return len(self.means)


@dataclass(frozen=True)
class DomainSolution:
    partition: tuple[tuple[int, ...], ...]
    chosen_m: tuple[float, ...]
    caps: tuple[float, ...]
    alphas: tuple[float, ...]
    guarantee: float = field(init=False)
    item_shares: tuple[float, ...] = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "guarantee", math.fsum(self.alphas))
        shares = [0.0] * len(self.chosen_m)
        for b in self.partition:
            m_k = math.fsum(self.chosen_m[i] for i in b)
            for i in b:
                shares[i] = self.chosen_m[i] / m_k
        object.__setattr__(self, "item_shares", tuple(shares))

    @property
    def n(self) -> int:
        return len(self.chosen_m)

    def bundle_means(self) -> list[float]:
        return [math.fsum(self.chosen_m[i] for i in b) for b in self.partition]

    def lams(self) -> list[float]:
        return [1.0 / math.log(c / a) for a, c in zip(self.alphas, self.caps)]

    def density(self, k: int, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        a, c = self.alphas[k], self.caps[k]
        inside = (p >= a) & (p <= c)
        return np.where(inside, 1.0 / (math.log(c / a) * np.where(inside, p, 1.0)), 0.0)

    def to_dict(self) -> dict:
        return {
            "variant": "domain",
            "partition": [list(b) for b in self.partition],
            "chosen_m": list(self.chosen_m),
            "caps": list(self.caps),
            "alphas": list(self.alphas),
            "guarantee": self.guarantee,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSolution":
        return cls(
            partition=tuple(tuple(b) for b in d["partition"]),
            chosen_m=tuple(d["chosen_m"]),
            caps=tuple(d["caps"]),
            alphas=tuple(d["alphas"]),
        )


def domain_mean_map(alpha: float, cap: float) -> float:
    return alpha * (1.0 + math.log(cap / alpha))


def solve_alpha(m: float, cap: float, max_iter: int = 400) -> float:
    """Bisection of the increasing map ``alpha -> alpha*(1 + log(cap/alpha))`` on ``(0, m)``."""
    if not 0.0 < m < cap:
        raise InvalidProblem("need 0 < m < cap")
    lo, hi = 0.0, m
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if domain_mean_map(mid, cap) < m:
            lo = mid
        else:
            hi = mid
    alpha = lo if abs(domain_mean_map(lo, cap) - m) <= abs(domain_mean_map(hi, cap) - m) else hi
    if alpha <= 0.0 or abs(domain_mean_map(alpha, cap) - m) > DOMAIN_TOL * max(1.0, m):
        raise NonConvergence(f"domain root for m={m}, cap={cap} did not converge")
    return alpha


def solve_domain(problem: DomainProblem) -> DomainSolution:
    alphas = []
    for b, cap in zip(problem.partition, problem.caps):
        alphas.append(solve_alpha(math.fsum(problem.means[i] for i in b), cap))
    return DomainSolution(problem.partition, problem.means, problem.caps, tuple(alphas))


def domain_curve(sol: DomainSolution) -> CurveDistribution:
    return CurveDistribution(sol.partition, sol.alphas, sol.caps, sol.item_shares)


def domain_mechanism(sol: DomainSolution) -> DirectMechanism:
    bundles = tuple(
        MenuBundle(alpha=a, beta=c, lam=lam, m=m, phi=None)
        for a, c, lam, m in zip(sol.alphas, sol.caps, sol.lams(), sol.bundle_means())
    )
    return DirectMechanism(RandomPriceMenu(sol.partition, bundles))


def payment_second_difference(sol: DomainSolution, samples: int = 1001) -> float:
    """Largest second difference of each bundle's payment on ``[alpha, cap]``."""
    mech = domain_mechanism(sol)
    worst = 0.0
    for b in mech.menu.bundles:
        w = np.linspace(b.alpha, b.beta, samples)
        t = b.payment(w)
        worst = max(worst, float(np.max(np.abs(t[2:] - 2.0 * t[1:-1] + t[:-2]))))
    return worst


def domain_saddle_check(sol: DomainSolution, trials: int = 100, seed: int = 0) -> SaddleReport:
    curve = domain_curve(sol)
    mech = domain_mechanism(sol)
    report = certify(sol, curve, mech, trials=trials, seed=seed, caps=sol.caps, moment_tol=1e-10)
    worst_root = max(abs(domain_mean_map(a, c) - m) for a, c, m in zip(sol.alphas, sol.caps, sol.bundle_means()))
    report.add("mean_equation", worst_root <= DOMAIN_TOL, worst_root, DOMAIN_TOL)
    # int g = lam * log(cap/alpha)
    mass = max(abs(b.lam / b.normaliser() - 1.0) for b in mech.menu.bundles)
    report.add("density_mass", mass <= DOMAIN_TOL, mass, DOMAIN_TOL)
    lin = payment_second_difference(sol)
    report.add("payment_linearity", lin <= DOMAIN_TOL, lin, DOMAIN_TOL)
    return report
