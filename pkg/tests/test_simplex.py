import numpy as np
import pytest

from robust_bundling.simplex import phase_one


class TestPhaseOne:
    def test_random_feasible_systems(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            m = int(rng.integers(2, 9))
            n = int(rng.integers(m, 3 * m + 4))
            A = rng.normal(size=(m, n))
            x0 = rng.random(n) * (rng.random(n) < 0.6)
            b = A @ x0
            res = phase_one(A, b)
            assert res.objective <= 1e-10
            assert res.feasible
            assert np.all(res.x >= 0)
            assert res.residual <= 1e-9

    def test_infeasible(self):
        # x1 + x2 = 1 and x1 + x2 = 2 cannot both hold
        res = phase_one([[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0])
        assert not res.feasible
        assert res.objective > 1e-6

    def test_negative_rhs(self):
        res = phase_one([[-1.0, -2.0]], [-4.0])
        assert res.feasible
        assert -res.x[0] - 2 * res.x[1] == pytest.approx(-4.0)

    def test_degenerate_cycling_example_terminates(self):
        # Beale's cycling example as an equality system with slacks
        A = np.array(
            [
                [0.25, -8.0, -1.0, 9.0, 1.0, 0.0, 0.0],
                [0.5, -12.0, -0.5, 3.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            ]
        )
        res = phase_one(A, [0.0, 0.0, 1.0])
        assert res.feasible
        assert res.iterations < 100
