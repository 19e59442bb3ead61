"""Per-bundle saddle parameters and the outer minimisation over moment boxes.

For a bundle with mean ``m`` and dispersion ``s`` the worst-case value of the
bundle is ``min(alpha*x, beta)`` with ``x`` Pareto on ``[1, inf)``.  The mean
condition gives ``beta = alpha*exp((m - alpha)/alpha)`` in closed form, which
turns the dispersion condition into a strictly monotone equation in
``alpha`` alone; :func:`solve_bundle` bisects it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dispersion import DispersionFunction, deriv, eval_phi
from .errors import DegenerateDispersion, InvalidProblem, NonConvergence
from .quadrature import gauss_legendre

ROOT_TOL = 1e-10
OUTER_TOL = 1e-6
GRID_POINTS = 21
_MAX_LOG_ELL = 700.0


@dataclass(frozen=True)
class BundleSolution:
    alpha: float
    beta: float
    lam: float
    m: float
    s: float
    ell: float

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "lambda": self.lam,
            "m": self.m,
            "s": self.s,
            "ell": self.ell,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BundleSolution":
        return cls(
            alpha=float(d["alpha"]),
            beta=float(d["beta"]),
            lam=float(d["lambda"]),
            m=float(d["m"]),
            s=float(d["s"]),
            ell=float(d["ell"]),
        )


@dataclass(frozen=True)
class AmbiguityProblem:
    """Item-mean box and per-bundle dispersion box over a partition of items."""

    n: int
    partition: tuple[tuple[int, ...], ...]
    mean_bounds: tuple[tuple[float, float], ...]
    kernels: tuple[DispersionFunction, ...]
    dispersion_bounds: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        seen = sorted(i for block in self.partition for i in block)
        if seen != list(range(self.n)):
            raise InvalidProblem(f"partition must cover items 0..{self.n - 1} exactly once")
        if any(len(block) == 0 for block in self.partition):
            raise InvalidProblem("partition blocks must be nonempty")
        if len(self.mean_bounds) != self.n:
            raise InvalidProblem("need one mean interval per item")
        k = len(self.partition)
        if len(self.kernels) != k or len(self.dispersion_bounds) != k:
            raise InvalidProblem("need one kernel and dispersion interval per bundle")
        for name, bounds in (("means", self.mean_bounds), ("dispersions", self.dispersion_bounds)):
            for idx, (lo, hi) in enumerate(bounds):
                if not (lo > 0.0 and hi >= lo and math.isfinite(hi)):
                    raise InvalidProblem(f"{name}[{idx}] interval must satisfy 0 < lo <= hi, got [{lo}, {hi}]")

    @classmethod
    def point(
        cls,
        means: Sequence[float],
        dispersions: Sequence[float],
        partition: Sequence[Sequence[int]] | None = None,
        kernels: Sequence[DispersionFunction] | DispersionFunction | None = None,
    ) -> "AmbiguityProblem":
        n = len(means)
        if partition is None:
            partition = [[i] for i in range(n)]
        part = tuple(tuple(int(i) for i in block) for block in partition)
        if kernels is None:
            kernels = DispersionFunction.quadratic()
        if isinstance(kernels, DispersionFunction):
            kernels = [kernels] * len(part)
        return cls(
            n=n,
            partition=part,
            mean_bounds=tuple((float(m), float(m)) for m in means),
            kernels=tuple(kernels),
            dispersion_bounds=tuple((float(s), float(s)) for s in dispersions),
        )

    @property
    def is_point(self) -> bool:
        return all(lo == hi for lo, hi in self.mean_bounds + self.dispersion_bounds)

    def bundle_of(self) -> list[int]:
        owner = [0] * self.n
        for k, block in enumerate(self.partition):
            for i in block:
                owner[i] = k
        return owner


@dataclass(frozen=True)
class SaddleSolution:
    partition: tuple[tuple[int, ...], ...]
    kernels: tuple[DispersionFunction, ...]
    bundles: tuple[BundleSolution, ...]
    chosen_m: tuple[float, ...]
    chosen_s: tuple[float, ...]
    guarantee: float = field(init=False)
    item_shares: tuple[float, ...] = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "guarantee", math.fsum(b.alpha for b in self.bundles))
        shares = [0.0] * len(self.chosen_m)
        for block in self.partition:
            total = math.fsum(self.chosen_m[i] for i in block)
            for i in block:
                shares[i] = self.chosen_m[i] / total
        object.__setattr__(self, "item_shares", tuple(shares))

    @property
    def n(self) -> int:
        return len(self.chosen_m)

    def to_dict(self) -> dict:
        return {
            "variant": "moment",
            "partition": [list(b) for b in self.partition],
            "kernels": [k.to_dict() for k in self.kernels],
            "bundles": [b.to_dict() for b in self.bundles],
            "chosen_m": list(self.chosen_m),
            "chosen_s": list(self.chosen_s),
            "item_shares": list(self.item_shares),
            "guarantee": self.guarantee,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SaddleSolution":
        return cls(
            partition=tuple(tuple(int(i) for i in b) for b in d["partition"]),
            kernels=tuple(DispersionFunction.from_dict(k) for k in d["kernels"]),
            bundles=tuple(BundleSolution.from_dict(b) for b in d["bundles"]),
            chosen_m=tuple(float(x) for x in d["chosen_m"]),
            chosen_s=tuple(float(x) for x in d["chosen_s"]),
        )


# -- inner solve ---------------------------------------------------------------


def _panels(log_ell: float) -> int:
    return max(1, min(400, int(math.ceil(2.0 * log_ell))))


def dispersion_lhs(alpha: float, m: float, phi: DispersionFunction) -> float:
    """Dispersion of ``min(alpha*x, beta)`` once ``beta`` is pinned by the mean.

    Returns ``inf`` when ``beta/alpha`` overflows, which only happens far on
    the small-``alpha`` side of the root.
    """
    log_ell = (m - alpha) / alpha
    if log_ell > _MAX_LOG_ELL:
        return math.inf
    beta = alpha * math.exp(log_ell)
    # x = e^t turns dx/x^2 into e^{-t} dt; the integrand is entire in t
    with np.errstate(over="ignore", invalid="ignore"):
        body = gauss_legendre(
            lambda t: eval_phi(phi, alpha * np.exp(t) - m) * np.exp(-t),
            0.0,
            log_ell,
            panels=_panels(log_ell),
        )
        value = body + eval_phi(phi, beta - m) * math.exp(-log_ell)
    return value if math.isfinite(value) else math.inf


def price_normaliser(alpha: float, beta: float, m: float, phi: DispersionFunction) -> float:
    """``lambda = 1 / int_alpha^beta [phi'(beta-m) - phi'(x-m)]/x dx``."""
    top = deriv(phi, beta - m, 1)
    log_ell = math.log(beta / alpha)
    integral = gauss_legendre(
        lambda t: top - deriv(phi, alpha * np.exp(t) - m, 1),
        0.0,
        log_ell,
        panels=_panels(log_ell),
    )
    return 1.0 / integral


def solve_bundle(m: float, s: float, phi: DispersionFunction, max_iter: int = 200) -> BundleSolution:
    """Unique ``(alpha, beta)`` matching bundle mean ``m`` and dispersion ``s``."""
    if not (m > 0.0 and s > 0.0):
        raise InvalidProblem(f"bundle moments must be positive, got m={m}, s={s}")
    if s < 1e-9 * m * m:
        raise DegenerateDispersion(f"dispersion {s} is below 1e-9*m^2 for m={m}")

    lo, hi = m * 1e-8, m * (1.0 - 1e-12)
    g_lo = dispersion_lhs(lo, m, phi) - s
    g_hi = dispersion_lhs(hi, m, phi) - s
    it = 0
    while g_lo <= 0.0 and it < max_iter:
        lo *= 1e-2
        g_lo = dispersion_lhs(lo, m, phi) - s
        it += 1
    if g_lo <= 0.0 or g_hi >= 0.0:
        raise NonConvergence(f"could not bracket the dispersion root for m={m}, s={s}")

    while it < max_iter:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g_mid = dispersion_lhs(mid, m, phi) - s
        if g_mid > 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
    else:
        raise NonConvergence(f"bisection did not converge in {max_iter} iterations")

    g_lo = dispersion_lhs(lo, m, phi) - s
    g_hi = dispersion_lhs(hi, m, phi) - s
    alpha = lo if abs(g_lo) <= abs(g_hi) else hi
    residual = min(abs(g_lo), abs(g_hi))
    if residual > ROOT_TOL * max(1.0, m, s):
        raise NonConvergence(f"dispersion residual {residual:.3e} above tolerance for m={m}, s={s}")

    log_ell = (m - alpha) / alpha
    beta = alpha * math.exp(log_ell)
    lam = price_normaliser(alpha, beta, m, phi)
    return BundleSolution(alpha=alpha, beta=beta, lam=lam, m=m, s=s, ell=math.exp(log_ell))


def mean_residual(sol: BundleSolution) -> float:
    return sol.alpha * (1.0 + math.log(sol.beta / sol.alpha)) - sol.m


def dispersion_residual(sol: BundleSolution, phi: DispersionFunction) -> float:
    log_ell = math.log(sol.beta / sol.alpha)
    body = gauss_legendre(
        lambda t: eval_phi(phi, sol.alpha * np.exp(t) - sol.m) * np.exp(-t),
        0.0,
        log_ell,
        panels=_panels(log_ell),
    )
    return body + eval_phi(phi, sol.beta - sol.m) * sol.alpha / sol.beta - sol.s


# -- outer minimisation --------------------------------------------------------


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    # endpoints matter: alpha is monotone in both moments on most boxes
    cands = [(f(lo), lo), (f(hi), hi), (fc, c), (fd, d)]
    val, arg = min(cands)
    return arg, val


def _minimise_bundle(
    m_box: tuple[float, float],
    s_box: tuple[float, float],
    phi: DispersionFunction,
) -> tuple[float, float, float]:
    """Return ``(m, s, alpha)`` minimising alpha over the rectangle."""
    cache: dict[tuple[float, float], float] = {}

    def alpha(m: float, s: float) -> float:
        key = (m, s)
        if key not in cache:
            cache[key] = solve_bundle(m, s, phi).alpha
        return cache[key]

    m_grid = np.linspace(*m_box, GRID_POINTS) if m_box[1] > m_box[0] else np.array([m_box[0]])
    s_grid = np.linspace(*s_box, GRID_POINTS) if s_box[1] > s_box[0] else np.array([s_box[0]])
    best = min((alpha(float(m), float(s)), float(m), float(s)) for m in m_grid for s in s_grid)
    if len(m_grid) == 1 and len(s_grid) == 1:
        return best[1], best[2], best[0]

    val, m_cur, s_cur = best
    for _ in range(20):
        prev = val
        if len(m_grid) > 1:
            m_cur, val = _golden_section(lambda x: alpha(x, s_cur), *m_box, OUTER_TOL * max(1.0, m_box[1]))
        if len(s_grid) > 1:
            s_cur, val = _golden_section(lambda x: alpha(m_cur, x), *s_box, OUTER_TOL * max(1.0, s_box[1]))
        if prev - val <= 1e-12:
            break
    if best[0] < val:
        val, m_cur, s_cur = best
    return m_cur, s_cur, val


def minimize_guarantee(problem: AmbiguityProblem) -> SaddleSolution:
    """Pick the moments in the box that minimise the revenue guarantee.

    Each bundle's ``alpha`` depends only on its own total mean and dispersion,
    so the search splits into one small rectangle per bundle.
    """
    chosen_m = [lo for lo, _ in problem.mean_bounds]
    chosen_s: list[float] = []
    bundles: list[BundleSolution] = []
    for block, phi, s_box in zip(problem.partition, problem.kernels, problem.dispersion_bounds):
        lo_sum = math.fsum(problem.mean_bounds[i][0] for i in block)
        hi_sum = math.fsum(problem.mean_bounds[i][1] for i in block)
        m_k, s_k, _ = _minimise_bundle((lo_sum, hi_sum), s_box, phi)
        # spread the bundle total across items along the box diagonal
        t = 0.0 if hi_sum == lo_sum else (m_k - lo_sum) / (hi_sum - lo_sum)
        for i in block:
            lo, hi = problem.mean_bounds[i]
            chosen_m[i] = lo + t * (hi - lo)
        m_k = math.fsum(chosen_m[i] for i in block)
        chosen_s.append(s_k)
        bundles.append(solve_bundle(m_k, s_k, phi))
    return SaddleSolution(
        partition=problem.partition,
        kernels=problem.kernels,
        bundles=tuple(bundles),
        chosen_m=tuple(chosen_m),
        chosen_s=tuple(chosen_s),
    )


def grid_guarantee(problem: AmbiguityProblem, points: int = GRID_POINTS) -> float:
    """Brute-force minimum of the guarantee over a product grid of the box."""
    total = 0.0
    for block, phi, (s_lo, s_hi) in zip(problem.partition, problem.kernels, problem.dispersion_bounds):
        lo_sum = sum(problem.mean_bounds[i][0] for i in block)
        hi_sum = sum(problem.mean_bounds[i][1] for i in block)
        ms = np.linspace(lo_sum, hi_sum, points) if hi_sum > lo_sum else [lo_sum]
        ss = np.linspace(s_lo, s_hi, points) if s_hi > s_lo else [s_lo]
        total += min(solve_bundle(float(m), float(s), phi).alpha for m in ms for s in ss)
    return total


# -- sensitivities -------------------------------------------------------------


@dataclass(frozen=True)
class SensitivityReport:
    fd_dalpha_dm: float
    fd_dalpha_ds: float
    printed_dalpha_dm: float
    printed_dalpha_ds: float
    implicit_dalpha_ds: float
    dm_agrees: bool
    ds_agrees: bool
    ds_sign_agrees: bool
    implicit_ds_agrees: bool
    rel_tol: float = 1e-3

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _rel_close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol * max(abs(a), abs(b), 1e-300)


def sensitivity_check(sol: BundleSolution, phi: DispersionFunction, rel_tol: float = 1e-3) -> SensitivityReport:
    """Compare finite-difference moment sensitivities with the closed forms.

    The printed closed forms are ``dalpha/dm = lam*alpha*int (phi'(beta-m) -
    phi'(x-m))/x^2`` and ``dalpha/ds = lam``.  Inverting the 2x2 Jacobian of
    the moment equations gives ``-lam`` for the latter; both candidates are
    reported next to the finite-difference value and neither is preferred.
    """
    hm = 1e-5 * sol.m
    hs = 1e-5 * sol.s
    fd_m = (solve_bundle(sol.m + hm, sol.s, phi).alpha - solve_bundle(sol.m - hm, sol.s, phi).alpha) / (2 * hm)
    fd_s = (solve_bundle(sol.m, sol.s + hs, phi).alpha - solve_bundle(sol.m, sol.s - hs, phi).alpha) / (2 * hs)

    top = deriv(phi, sol.beta - sol.m, 1)
    log_ell = math.log(sol.beta / sol.alpha)
    integral = gauss_legendre(
        lambda t: (top - deriv(phi, sol.alpha * np.exp(t) - sol.m, 1)) * np.exp(-t),
        0.0,
        log_ell,
        panels=_panels(log_ell),
    )
    # the substitution x = alpha*e^t leaves a 1/alpha factor on dx/x^2
    printed_m = sol.lam * sol.alpha * integral / sol.alpha
    printed_s = sol.lam
    implicit_s = -sol.lam
    return SensitivityReport(
        fd_dalpha_dm=fd_m,
        fd_dalpha_ds=fd_s,
        printed_dalpha_dm=printed_m,
        printed_dalpha_ds=printed_s,
        implicit_dalpha_ds=implicit_s,
        dm_agrees=_rel_close(fd_m, printed_m, rel_tol),
        ds_agrees=_rel_close(fd_s, printed_s, rel_tol),
        ds_sign_agrees=(fd_s > 0) == (printed_s > 0),
        implicit_ds_agrees=_rel_close(fd_s, implicit_s, rel_tol),
        rel_tol=rel_tol,
    )
