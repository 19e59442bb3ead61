import math

import numpy as np
import pytest

from robust_bundling import AmbiguityProblem, minimize_guarantee
from robust_bundling.adversary import (
    Infeasible,
    default_shift_point,
    filter_capped,
    flattened_alpha_derivative,
    flattened_cdf,
    lp_feasible_distribution,
    moment_rows,
    prop2_distribution,
    prop3_distribution,
    random_support,
    trial_seeds,
)
from robust_bundling.errors import EpsilonTooLarge, HypothesisViolated
from robust_bundling.mechanism import revenue
from robust_bundling.worst_case import discretize, expect_curve


def _disc_disp(dist, kernel, m):
    return dist.expect(lambda v: kernel(v.sum(axis=1) - m))


class TestCornerTransfer:
    def test_moments_preserved(self, coarse, coarse_curve):
        d = prop3_distribution(coarse_curve, 0.01)
        assert np.allclose(d.mean(), coarse.chosen_m, atol=1e-8)
        assert abs(_disc_disp(d, coarse.kernels[0], 1.1) - 0.1) <= 1e-6

    def test_zero_epsilon_is_base(self, coarse_curve):
        a = prop3_distribution(coarse_curve, 0.0)
        b = discretize(coarse_curve)
        assert np.array_equal(a.points, b.points) and np.array_equal(a.weights, b.weights)

    def test_bundle_total_law_unchanged(self, coarse_curve):
        base = prop3_distribution(coarse_curve, 0.0)
        moved = prop3_distribution(coarse_curve, 0.01)
        totals = np.unique(np.round(base.points.sum(axis=1), 14))
        cdf = lambda d: np.array([d.weights[d.points.sum(axis=1) <= t + 1e-13].sum() for t in totals])
        assert np.max(np.abs(cdf(base) - cdf(moved))) <= 1e-12

    def test_bundling_revenue_unhurt(self, coarse, coarse_curve, coarse_mech):
        d = prop3_distribution(coarse_curve, 0.01)
        assert revenue(coarse_mech, d) >= coarse.guarantee - 1e-6

    def test_epsilon_bounds(self, coarse_curve, separate_curve):
        with pytest.raises(EpsilonTooLarge):
            prop3_distribution(coarse_curve, coarse_curve.atom_mass())
        with pytest.raises(EpsilonTooLarge):
            prop3_distribution(coarse_curve, -0.1)
        with pytest.raises(ValueError):
            prop3_distribution(separate_curve, 0.01)


class TestFlattenedPareto:
    def test_cdf_is_valid(self):
        x = np.linspace(0.0, 50.0, 20_001)
        h = flattened_cdf(x, 5.0, 0.3)
        assert np.all(np.diff(h) >= 0)
        assert h[0] == 0.0 and h[-1] > 0.97
        assert np.all(h[(x > 4.7) & (x < 5.0)] == pytest.approx(1 - 1 / 4.7))
        assert flattened_cdf(5.5, 5.0, 0.3) == pytest.approx(1 - 1 / 5.2)

    def test_maximal_item_drops_other_unchanged(self, separate):
        res = prop2_distribution(separate, 1e-3)
        (i,) = res.maximal
        assert separate.bundles[i].ell == max(b.ell for b in separate.bundles)
        assert res.alphas[i] < separate.bundles[i].alpha
        for j in range(2):
            if j != i:
                assert res.alphas[j] == separate.bundles[j].alpha
        assert max(abs(r) for r in res.residuals[i]) <= 1e-10

    def test_perturbed_moments(self, separate):
        res = prop2_distribution(separate, 1e-2)
        for i, (m, s, phi) in enumerate(zip(separate.chosen_m, separate.chosen_s, separate.kernels)):
            assert abs(expect_curve(res.curve, lambda v: v[:, i]) - m) <= 1e-8
            assert abs(expect_curve(res.curve, lambda v: phi(v[:, i] - m)) - s) <= 1e-8
        assert np.allclose(res.discrete.mean(), separate.chosen_m, atol=1e-8)

    def test_continuity_at_zero(self, separate):
        res = prop2_distribution(separate, 1e-7)
        for i, b in enumerate(separate.bundles):
            assert abs(res.alphas[i] - b.alpha) <= 1e-6
            assert abs(res.ells[i] - b.ell) <= 1e-6

    def test_default_shift_point_is_midpoint(self, separate):
        ells = sorted(b.ell for b in separate.bundles)
        assert default_shift_point(separate) == pytest.approx(0.5 * sum(ells))

    def test_hypothesis_checks(self, separate, coarse):
        twins = minimize_guarantee(AmbiguityProblem.point([0.5, 0.5], [0.1, 0.1]))
        with pytest.raises(HypothesisViolated):
            prop2_distribution(twins, 1e-3)
        with pytest.raises(ValueError):
            prop2_distribution(coarse, 1e-3)
        with pytest.raises(EpsilonTooLarge):
            prop2_distribution(separate, 1.0)

    def test_derivative_from_jacobian_matches_finite_difference(self, separate):
        (i,) = prop2_distribution(separate, 1e-3).maximal
        d = flattened_alpha_derivative(separate, i)
        assert d.finite_difference < 0
        assert d.implicit_agrees
        assert d.finite_difference == pytest.approx(d.implicit, rel=1e-3)
        # the ratio over [1, ell_i] is reported alongside, not substituted
        assert math.isfinite(d.printed)


class TestLinearProgram:
    def test_worst_case_support_is_feasible(self, separate, separate_curve):
        d = discretize(separate_curve, bins=40)
        out = lp_feasible_distribution(separate, d.points)
        assert not isinstance(out, Infeasible)
        A, b = moment_rows(out.points, separate.chosen_m, separate.partition, separate.kernels, separate.chosen_s)
        # discretisation shifts the dispersion slightly, so compare with the reweighted system
        assert np.max(np.abs(A @ out.weights - b)) <= 1e-9

    def test_two_point_support_infeasible(self):
        sol = minimize_guarantee(AmbiguityProblem.point([0.5], [0.1]))
        # mass 1/2 on 0 and on 1 is forced by the mean, giving variance 0.25 != 0.1
        out = lp_feasible_distribution(sol, [[0.0], [1.0]])
        assert isinstance(out, Infeasible)
        assert out.objective > 0

    @pytest.mark.parametrize("which", ["separate", "coarse"])
    def test_random_supports_respect_guarantee(self, which, request):
        sol = request.getfixturevalue(which)
        from robust_bundling.worst_case import CurveDistribution
        from robust_bundling.mechanism import mechanism_for

        curve, mech = CurveDistribution.from_solution(sol), mechanism_for(sol)
        feasible = 0
        for ss in trial_seeds(123, 100):
            d = lp_feasible_distribution(sol, random_support(curve, sol.chosen_m, 30, ss))
            if isinstance(d, Infeasible):
                continue
            feasible += 1
            A, b = moment_rows(d.points, sol.chosen_m, sol.partition, sol.kernels, sol.chosen_s)
            assert np.max(np.abs(A @ d.weights - b)) <= 1e-9
            assert revenue(mech, d) >= sol.guarantee - 1e-6
        assert feasible >= 50

    def test_cap_filter_drops_violators(self):
        pts = np.array([[0.2, 0.3], [0.9, 0.3], [0.5, 0.5]])
        kept = filter_capped(pts, ((0,), (1,)), (0.8, 0.8))
        assert kept.tolist() == [[0.2, 0.3], [0.5, 0.5]]

    def test_trial_seeds_deterministic(self):
        a = [np.random.default_rng(s).random() for s in trial_seeds(5, 3)]
        b = [np.random.default_rng(s).random() for s in trial_seeds(5, 3)]
        assert a == b and len(set(a)) == 3
