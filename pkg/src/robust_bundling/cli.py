"""Command-line front end.

Commands: ``solve``, ``domain-solve``, ``verify``, ``adversary``, ``plot-data``.
Exit codes: 0 success, 1 failed verification check, 2 bad input, 3 solver
non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .adversary import (
    Infeasible,
    lp_feasible_distribution,
    prop2_distribution,
    prop3_distribution,
    random_support,
    trial_seeds,
)
from .config import ConfigError, RunConfig, dump_json, load_config
from .domain_variant import DomainProblem, DomainSolution, domain_curve, domain_mechanism, domain_saddle_check, solve_domain
from .errors import (
    DegenerateDispersion,
    EpsilonTooLarge,
    HypothesisViolated,
    InvalidProblem,
    NewtonDivergence,
    NonConvergence,
)
from .mechanism import DirectMechanism, mechanism_for
from .saddle_core import SaddleSolution, minimize_guarantee
from .verifier import certify, search_bundling_gap, total_survival
from .worst_case import CurveDistribution, DiscreteDistribution, write_support_csv

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
PLOT_KINDS = ("support", "revenue_surface", "price_density", "bundling_profit")
PROFIT_POINTS = 601


class UsageError(Exception):
    pass


def _solve(cfg: RunConfig) -> SaddleSolution | DomainSolution:
    if isinstance(cfg.problem, DomainProblem):
        return solve_domain(cfg.problem)
    return minimize_guarantee(cfg.problem)


def _load_solution(path: str | None) -> SaddleSolution | DomainSolution:
    if path is None:
        raise UsageError("--solution is required")
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"solution: cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"solution: invalid JSON ({exc.msg})") from exc
    try:
        if data.get("variant") == "domain":
            return DomainSolution.from_dict(data)
        return SaddleSolution.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"solution: malformed field {exc}") from exc


def _objects(sol) -> tuple[CurveDistribution, DirectMechanism]:
    if isinstance(sol, DomainSolution):
        return domain_curve(sol), domain_mechanism(sol)
    return CurveDistribution.from_solution(sol), mechanism_for(sol, strict=False)


def _is_finest(sol) -> bool:
    return all(len(b) == 1 for b in sol.partition)


def _structured(sol: SaddleSolution, curve: CurveDistribution) -> list[tuple[str, DiscreteDistribution]]:
    """Counterexample perturbations that apply to this instance's shape."""
    out = []
    if len(sol.partition) == 1 and sol.n >= 2:
        eps = min(0.01, 0.5 * curve.atom_mass())
        out.append((f"corner_transfer(eps={eps:g})", prop3_distribution(curve, eps)))
    if _is_finest(sol) and sol.n >= 2:
        try:
            out.append(("flattened_pareto(eps=0.001)", prop2_distribution(sol, 1e-3).discrete))
        except (HypothesisViolated, EpsilonTooLarge, NewtonDivergence):
            pass
    return out


def _out_path(args, default: str) -> Path:
    return Path(args.out) if args.out else Path(default)


# -- commands ------------------------------------------------------------------


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    if args.command == "domain-solve" and cfg.variant != "domain":
        raise ConfigError("variant: domain-solve needs a domain-variant config")
    sol = _solve(cfg)
    out = _out_path(args, "solution.json")
    dump_json(sol.to_dict(), out)
    print(f"guarantee {sol.guarantee!r} written to {out}")
    return EXIT_OK


def _config_match(cfg: RunConfig, sol) -> tuple[bool, str]:
    prob = cfg.problem
    if tuple(tuple(b) for b in prob.partition) != tuple(tuple(b) for b in sol.partition):
        return False, "partition differs from config"
    if isinstance(prob, DomainProblem):
        ok = isinstance(sol, DomainSolution) and sol.chosen_m == prob.means and sol.caps == prob.caps
        return ok, "means/caps"
    if not isinstance(sol, SaddleSolution):
        return False, "solution variant differs from config"
    inside = all(lo - 1e-12 <= m <= hi + 1e-12 for m, (lo, hi) in zip(sol.chosen_m, prob.mean_bounds))
    inside &= all(lo - 1e-12 <= s <= hi + 1e-12 for s, (lo, hi) in zip(sol.chosen_s, prob.dispersion_bounds))
    inside &= tuple(sol.kernels) == tuple(prob.kernels)
    return inside, "chosen moments inside the config boxes"


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    sol = _load_solution(args.solution)
    seed = cfg.seed if args.seed is None else args.seed
    trials = cfg.trials if args.trials is None else args.trials
    tol = cfg.tolerances
    if isinstance(sol, DomainSolution):
        report = domain_saddle_check(sol, trials=trials, seed=seed)
    else:
        curve, mech = _objects(sol)
        report = certify(
            sol,
            curve,
            mech,
            trials=trials,
            seed=seed,
            structured=_structured(sol, curve),
            moment_tol=tol.get("moment", 1e-8),
            seller_tol=tol.get("seller", 1e-8),
            nature_tol=tol.get("nature", 1e-6),
        )
        worst_lam = max(abs(b.lam / m.normaliser() - 1.0) for b, m in zip(sol.bundles, mech.menu.bundles))
        report.add("normaliser", worst_lam <= 1e-8, worst_lam, 1e-8)
    ok, detail = _config_match(cfg, sol)
    report.add("config_match", ok, float(ok), 1.0, detail)
    out = _out_path(args, "report.json")
    dump_json(report.to_dict(), out)
    failed = report.failed()
    if failed:
        print("FAILED: " + ", ".join(failed), file=sys.stderr)
        return EXIT_FAILED
    print(f"all {len(report.checks)} checks passed; report written to {out}")
    return EXIT_OK


def cmd_adversary(args) -> int:
    cfg = load_config(args.config)
    sol = _load_solution(args.solution)
    seed = cfg.seed if args.seed is None else args.seed
    trials = cfg.trials if args.trials is None else args.trials
    curve, mech = _objects(sol)
    what = args.what
    if what is None:
        if len(sol.partition) == 1 and sol.n >= 2:
            what = "prop3"
        elif _is_finest(sol) and sol.n >= 2:
            what = "prop2"
        else:
            what = "lp"
    caps = sol.caps if isinstance(sol, DomainSolution) else None
    summary: dict = {"kind": what}
    if what == "prop3":
        eps = min(0.01, 0.5 * curve.atom_mass())
        dist = prop3_distribution(curve, eps)
        summary["epsilon"] = eps
    elif what == "prop2":
        gap = search_bundling_gap(sol)
        res = prop2_distribution(sol, gap.epsilon)
        dist = res.discrete
        summary.update(epsilon=gap.epsilon, bundling_gap=gap.gap, best_bundle_price=gap.best_price, alphas=list(res.alphas))
    elif what == "lp":
        dist = None
        for k, ss in enumerate(trial_seeds(seed, max(trials, 1))):
            cand = lp_feasible_distribution(sol, random_support(curve, sol.chosen_m, 30, ss, caps=caps), caps=caps)
            if not isinstance(cand, Infeasible):
                dist = cand
                summary["trial"] = k
                break
        if dist is None:
            raise UsageError("adversary: no feasible LP trial found")
    else:
        raise UsageError(f"--what: unknown adversary {what!r}")
    summary["revenue"] = float(np.dot(dist.weights, mech.payment(dist.points)))
    summary["guarantee"] = sol.guarantee
    out = _out_path(args, f"adversary_{what}.csv")
    dist.write_csv(out)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _write_bundling_profit(sol, curve: CurveDistribution, out: Path) -> None:
    items = tuple(range(curve.n))
    hi = 1.2 * float(curve.top_point().sum())
    prices = np.linspace(0.0, hi, PROFIT_POINTS)[1:]
    base = prices * total_survival(curve, items, prices)
    perturbed = np.full_like(prices, math.nan)
    if isinstance(sol, SaddleSolution) and _is_finest(sol) and sol.n >= 2:
        try:
            gap = search_bundling_gap(sol)
            shifted = prop2_distribution(sol, gap.epsilon).curve
            perturbed = prices * total_survival(shifted, items, prices)
        except (HypothesisViolated, EpsilonTooLarge, NewtonDivergence):
            pass
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "fstar", "perturbed"])
        for p, a, b in zip(prices, base, perturbed):
            w.writerow([f"{p:.12g}", f"{a:.12g}", f"{b:.12g}"])


def cmd_plot_data(args) -> int:
    sol = _load_solution(args.solution)
    if args.config:
        load_config(args.config)
    what = args.what
    if what not in PLOT_KINDS:
        raise UsageError(f"--what: expected one of {', '.join(PLOT_KINDS)}")
    curve, mech = _objects(sol)
    out = _out_path(args, f"{what}.csv")
    if what == "support":
        write_support_csv(curve, out)
    elif what == "revenue_surface":
        if mech.n != 2:
            raise UsageError("--what revenue_surface: needs exactly two items")
        mech.write_revenue_surface_csv(out)
    elif what == "price_density":
        mech.menu.write_density_csv(out)
    else:
        _write_bundling_profit(sol, curve, out)
    print(f"{what} written to {out}")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------


HANDLERS = {
    "solve": cmd_solve,
    "domain-solve": cmd_solve,
    "verify": cmd_verify,
    "adversary": cmd_adversary,
    "plot-data": cmd_plot_data,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-bundling", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    for name in HANDLERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "plot-data")
        p.add_argument("--out")
        if name in ("verify", "adversary", "plot-data"):
            p.add_argument("--solution")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        if name in ("adversary", "plot-data"):
            p.add_argument("--what", required=name == "plot-data")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return HANDLERS[args.command](args)
    except (ConfigError, UsageError, InvalidProblem, DegenerateDispersion, EpsilonTooLarge, HypothesisViolated) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NonConvergence, NewtonDivergence) as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
