import numpy as np
import pytest
from hypothesis import given, strategies as st

from robust_bundling.dispersion import DispersionFunction, deriv, eval_phi, shifted_coefficients


class TestEvaluation:
    @pytest.mark.parametrize(
        "a, b, x, expected",
        [(1.0, 0.0, 0.0, 0.0), (1.0, 0.0, 0.5, 0.25), (1.0, 1.0, 2.0, 20.0)],
    )
    def test_values(self, a, b, x, expected):
        assert eval_phi(DispersionFunction(a, b), x) == expected

    @pytest.mark.parametrize(
        "a, b, x, order, expected",
        [(1.0, 0.0, 0.3, 1, 0.6), (1.0, 0.0, -7.0, 2, 2.0), (1.0, 0.0, 123.0, 2, 2.0), (1.0, 1.0, 1.0, 1, 6.0)],
    )
    def test_derivatives(self, a, b, x, order, expected):
        assert deriv(DispersionFunction(a, b), x, order) == pytest.approx(expected, abs=1e-15)

    def test_zero_at_origin_exactly(self):
        for phi in (DispersionFunction.quadratic(), DispersionFunction.quartic(0.3, 5.0)):
            assert eval_phi(phi, 0.0) == 0.0

    def test_bad_order_rejected(self):
        with pytest.raises(ValueError):
            deriv(DispersionFunction(), 1.0, 3)


class TestInvariants:
    @pytest.mark.parametrize("phi", [DispersionFunction.quadratic(), DispersionFunction.quartic(0.5, 2.0)])
    def test_first_derivative_matches_central_difference(self, phi):
        rng = np.random.default_rng(0)
        x = rng.uniform(-3.0, 3.0, 10_000)
        h = 1e-6
        fd = (eval_phi(phi, x + h) - eval_phi(phi, x - h)) / (2 * h)
        assert np.all(np.abs(deriv(phi, x, 1) - fd) <= 1e-6 * (1 + np.abs(x) ** 3))

    @pytest.mark.parametrize("phi", [DispersionFunction.quadratic(), DispersionFunction.quartic(0.5, 2.0)])
    def test_curvature_floor_and_evenness(self, phi):
        x = np.random.default_rng(1).uniform(-10.0, 10.0, 10_000)
        assert np.all(deriv(phi, x, 2) >= phi.curvature_floor)
        assert np.array_equal(eval_phi(phi, x), eval_phi(phi, -x))

    @given(
        a=st.floats(1e-3, 10.0),
        b=st.floats(0.0, 10.0),
        x=st.floats(-5.0, 5.0),
        dx=st.floats(1e-3, 2.0),
    )
    def test_first_derivative_strictly_increasing(self, a, b, x, dx):
        phi = DispersionFunction(a, b)
        assert deriv(phi, x + dx, 1) > deriv(phi, x, 1)

    @given(shift=st.floats(-3.0, 3.0), p=st.floats(-3.0, 3.0))
    def test_shifted_polynomial(self, shift, p):
        phi = DispersionFunction.quartic(0.7, 1.3)
        val = np.polynomial.Polynomial(shifted_coefficients(phi, shift))(p)
        assert val == pytest.approx(eval_phi(phi, p - shift), rel=1e-10, abs=1e-10)


class TestValidation:
    @pytest.mark.parametrize("a, b", [(0.0, 0.0), (-1.0, 0.0), (1.0, -0.1), (float("nan"), 0.0)])
    def test_rejects_non_strongly_convex(self, a, b):
        with pytest.raises(ValueError):
            DispersionFunction(a, b)

    @pytest.mark.parametrize("phi", [DispersionFunction.quadratic(), DispersionFunction.quartic(2.0, 0.5)])
    def test_round_trip(self, phi):
        assert DispersionFunction.from_dict(phi.to_dict()) == phi

    def test_serial_forms(self):
        assert DispersionFunction.quadratic().to_dict() == {"kind": "quadratic"}
        assert DispersionFunction(1.0, 1.0).to_dict() == {"kind": "quartic", "a": 1.0, "b": 1.0}
        with pytest.raises(ValueError):
            DispersionFunction.from_dict({"kind": "cubic"})
