import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from robust_bundling.dispersion import DispersionFunction, deriv
from robust_bundling.errors import DegenerateDispersion, InvalidProblem
from robust_bundling.saddle_core import (
    AmbiguityProblem,
    BundleSolution,
    SaddleSolution,
    dispersion_lhs,
    dispersion_residual,
    grid_guarantee,
    mean_residual,
    minimize_guarantee,
    price_normaliser,
    sensitivity_check,
    solve_bundle,
)

QUAD = DispersionFunction.quadratic()


class TestDispersionSide:
    @pytest.mark.parametrize("alpha", [0.05, 0.2, 0.4, 0.59])
    def test_matches_closed_form(self, alpha):
        assert dispersion_lhs(alpha, 0.6, QUAD) == pytest.approx(oracles.quadratic_lhs(alpha, 0.6), rel=1e-13)

    @pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
    def test_quartic_matches_adaptive_quadrature(self, alpha):
        phi = DispersionFunction.quartic(0.5, 3.0)
        assert dispersion_lhs(alpha, 1.1, phi) == pytest.approx(oracles.quad_lhs(alpha, 1.1, phi), rel=1e-10)

    def test_strictly_decreasing(self):
        alphas = np.linspace(0.01, 0.599, 400)
        vals = np.array([dispersion_lhs(a, 0.6, QUAD) for a in alphas])
        assert np.all(np.diff(vals) < 0)

    def test_overflow_side_is_infinite(self):
        assert dispersion_lhs(1e-6, 1.0, QUAD) == math.inf


class TestSolveBundle:
    def test_lands_in_unique_oracle_bracket(self):
        brackets = oracles.quadratic_bracket(0.6, 0.1)
        assert len(brackets) == 1
        lo, hi = brackets[0]
        sol = solve_bundle(0.6, 0.1, QUAD)
        assert lo <= sol.alpha <= hi
        assert sol.alpha < 0.6 < sol.beta

    def test_residuals(self):
        sol = solve_bundle(0.6, 0.1, QUAD)
        assert abs(mean_residual(sol)) <= 1e-10
        assert abs(dispersion_residual(sol, QUAD)) <= 1e-10
        assert sol.ell == pytest.approx(sol.beta / sol.alpha, rel=1e-14)

    def test_normaliser_matches_adaptive_quadrature(self):
        sol = solve_bundle(0.6, 0.1, QUAD)
        ref = oracles.quad_normaliser(sol.alpha, sol.beta, sol.m, lambda x: deriv(QUAD, x, 1))
        assert sol.lam > 0
        assert sol.lam == pytest.approx(ref, rel=1e-11)
        assert price_normaliser(sol.alpha, sol.beta, sol.m, QUAD) == sol.lam

    def test_small_dispersion_follows_oracle(self):
        # the true gap m - alpha shrinks like s**(1/3), not s
        sol = solve_bundle(0.5, 1e-8, QUAD)
        (lo, hi), = oracles.quadratic_bracket(0.5, 1e-8, points=200_001)
        assert lo <= sol.alpha <= hi
        coarser = solve_bundle(0.5, 1e-5, QUAD)
        assert (0.5 - coarser.alpha) / (0.5 - sol.alpha) == pytest.approx(10.0, rel=0.02)
        assert 0.5 <= sol.beta <= 0.5 + 1e-2

    def test_gap_shrinks_with_dispersion(self):
        gaps = [0.5 - solve_bundle(0.5, s, QUAD).alpha for s in (1e-2, 1e-4, 1e-6, 1e-8)]
        assert all(a > b for a, b in zip(gaps, gaps[1:]))

    @pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
    def test_scale_covariance(self, c):
        base = solve_bundle(1.1, 0.1, QUAD).alpha
        assert solve_bundle(c * 1.1, c * c * 0.1, QUAD).alpha == pytest.approx(c * base, rel=1e-8)

    def test_degenerate_dispersion_rejected(self):
        with pytest.raises(DegenerateDispersion):
            solve_bundle(1.0, 1e-10, QUAD)

    @pytest.mark.parametrize("m, s", [(0.0, 0.1), (1.0, 0.0), (-1.0, 0.1)])
    def test_nonpositive_moments_rejected(self, m, s):
        with pytest.raises(InvalidProblem):
            solve_bundle(m, s, QUAD)

    @settings(max_examples=40, deadline=None)
    @given(
        m=st.floats(0.05, 20.0),
        rel_s=st.floats(1e-4, 5.0),
        a=st.floats(0.2, 3.0),
        b=st.floats(0.0, 2.0),
    )
    def test_residuals_property(self, m, rel_s, a, b):
        phi = DispersionFunction(a, b)
        s = rel_s * a * m * m
        sol = solve_bundle(m, s, phi)
        tol = 1e-10 * max(1.0, m, s)
        assert 0 < sol.alpha < m < sol.beta
        assert abs(mean_residual(sol)) <= tol
        assert abs(dispersion_residual(sol, phi)) <= tol
        assert 0 < sol.lam < math.inf

    def test_round_trip(self):
        sol = solve_bundle(0.6, 0.1, QUAD)
        assert BundleSolution.from_dict(sol.to_dict()) == sol


class TestProblem:
    def test_point_defaults(self):
        p = AmbiguityProblem.point([0.6, 0.5], [0.1, 0.1])
        assert p.partition == ((0,), (1,))
        assert p.is_point
        assert p.bundle_of() == [0, 1]

    @pytest.mark.parametrize(
        "kwargs, field",
        [
            (dict(partition=((0,), (0,))), "partition"),
            (dict(mean_bounds=((-0.1, 0.5), (0.5, 0.5))), "means[0]"),
            (dict(dispersion_bounds=((0.1, 0.1), (0.2, 0.1))), "dispersions[1]"),
        ],
    )
    def test_invalid_fields_named(self, kwargs, field):
        base = dict(
            n=2,
            partition=((0,), (1,)),
            mean_bounds=((0.6, 0.6), (0.5, 0.5)),
            kernels=(QUAD, QUAD),
            dispersion_bounds=((0.1, 0.1), (0.1, 0.1)),
        )
        base.update(kwargs)
        with pytest.raises(InvalidProblem, match=field.replace("[", r"\[").replace("]", r"\]")):
            AmbiguityProblem(**base)


class TestMinimizeGuarantee:
    def test_point_problem_is_per_bundle_solve(self, separate):
        assert separate.bundles[0] == solve_bundle(0.6, 0.1, QUAD)
        assert separate.bundles[1] == solve_bundle(0.5, 0.1, QUAD)
        assert separate.guarantee == math.fsum(b.alpha for b in separate.bundles)
        assert separate.item_shares == (1.0, 1.0)

    def test_dispersion_box_picks_grid_endpoint(self):
        p = AmbiguityProblem(
            n=2,
            partition=((0,), (1,)),
            mean_bounds=((0.6, 0.6), (0.5, 0.5)),
            kernels=(QUAD, QUAD),
            dispersion_bounds=((0.05, 0.1), (0.05, 0.1)),
        )
        sol = minimize_guarantee(p)
        # alpha decreases in s, so the grid oracle's minimiser is the upper endpoint
        grid = [min((solve_bundle(m, s, QUAD).alpha, s) for s in np.linspace(0.05, 0.1, 21))[1] for m in (0.6, 0.5)]
        assert sol.chosen_s == pytest.approx(grid, abs=1e-6)
        assert sol.guarantee <= grid_guarantee(p) + 1e-6

    def test_mean_box_reduces_to_bundle_total(self):
        p = AmbiguityProblem(
            n=2,
            partition=((0, 1),),
            mean_bounds=((0.5, 0.7), (0.4, 0.6)),
            kernels=(QUAD,),
            dispersion_bounds=((0.1, 0.1),),
        )
        sol = minimize_guarantee(p)
        oracle = min(solve_bundle(float(m), 0.1, QUAD).alpha for m in np.linspace(0.9, 1.3, 401))
        assert sol.guarantee <= oracle + 1e-6
        assert sol.guarantee <= grid_guarantee(p) + 1e-6
        m_k = sum(sol.chosen_m)
        assert 0.9 <= m_k <= 1.3
        assert 0.5 <= sol.chosen_m[0] <= 0.7 and 0.4 <= sol.chosen_m[1] <= 0.6
        assert sum(sol.item_shares) == pytest.approx(1.0, abs=1e-15)

    def test_two_dimensional_box_never_beats_grid_from_above(self):
        p = AmbiguityProblem(
            n=3,
            partition=((0, 2), (1,)),
            mean_bounds=((0.3, 0.6), (0.5, 0.8), (0.2, 0.2)),
            kernels=(QUAD, DispersionFunction.quartic(1.0, 0.5)),
            dispersion_bounds=((0.05, 0.2), (0.02, 0.04)),
        )
        sol = minimize_guarantee(p)
        assert sol.guarantee <= grid_guarantee(p) + 1e-6
        for (lo, hi), m in zip(p.mean_bounds, sol.chosen_m):
            assert lo <= m <= hi
        for (lo, hi), s in zip(p.dispersion_bounds, sol.chosen_s):
            assert lo <= s <= hi

    def test_round_trip(self, separate):
        assert SaddleSolution.from_dict(separate.to_dict()) == separate


class TestSensitivity:
    def test_mean_derivative_matches_printed_form(self):
        rep = sensitivity_check(solve_bundle(0.6, 0.1, QUAD), QUAD)
        assert rep.dm_agrees
        assert rep.fd_dalpha_dm == pytest.approx(rep.printed_dalpha_dm, rel=1e-3)

    def test_dispersion_derivative_sign_is_surfaced(self):
        sol = solve_bundle(0.6, 0.1, QUAD)
        rep = sensitivity_check(sol, QUAD)
        assert rep.fd_dalpha_ds < 0
        assert rep.printed_dalpha_ds == sol.lam
        assert not rep.ds_sign_agrees and not rep.ds_agrees
        assert rep.implicit_ds_agrees

    def test_degenerate_limit(self):
        rep = sensitivity_check(solve_bundle(0.5, 1e-6, QUAD), QUAD)
        assert abs(rep.fd_dalpha_dm - 1.0) <= 1e-2

    def test_report_is_plain_data(self):
        d = sensitivity_check(solve_bundle(0.6, 0.1, QUAD), QUAD).to_dict()
        assert set(d) >= {"fd_dalpha_dm", "fd_dalpha_ds", "printed_dalpha_ds", "implicit_dalpha_ds"}
