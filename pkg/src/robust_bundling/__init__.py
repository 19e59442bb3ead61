"""Robustly optimal bundled random-price mechanisms under moment ambiguity."""

from .dispersion import DispersionFunction, deriv, eval_phi
from .domain_variant import DomainProblem, DomainSolution, domain_saddle_check, solve_domain
from .errors import (
    DegenerateDispersion,
    EpsilonTooLarge,
    HypothesisViolated,
    InvalidProblem,
    NewtonDivergence,
    NonConvergence,
    RobustBundlingError,
)
from .mechanism import DirectMechanism, RandomPriceMenu, build_menu, lagrangian, mechanism_for, revenue
from .saddle_core import (
    AmbiguityProblem,
    BundleSolution,
    SaddleSolution,
    minimize_guarantee,
    sensitivity_check,
    solve_bundle,
)
from .verifier import SaddleReport, certify, nature_sweep, seller_bound_under_fstar, seller_menu_sweep
from .worst_case import CurveDistribution, DiscreteDistribution, expect_curve, posted_price_revenue, sample_curve

__all__ = [
    "AmbiguityProblem",
    "BundleSolution",
    "CurveDistribution",
    "DegenerateDispersion",
    "DirectMechanism",
    "DiscreteDistribution",
    "DispersionFunction",
    "DomainProblem",
    "DomainSolution",
    "EpsilonTooLarge",
    "HypothesisViolated",
    "InvalidProblem",
    "NewtonDivergence",
    "NonConvergence",
    "RandomPriceMenu",
    "RobustBundlingError",
    "SaddleReport",
    "SaddleSolution",
    "build_menu",
    "certify",
    "deriv",
    "domain_saddle_check",
    "eval_phi",
    "expect_curve",
    "lagrangian",
    "mechanism_for",
    "minimize_guarantee",
    "nature_sweep",
    "posted_price_revenue",
    "revenue",
    "sample_curve",
    "seller_bound_under_fstar",
    "seller_menu_sweep",
    "sensitivity_check",
    "solve_bundle",
    "solve_domain",
]
