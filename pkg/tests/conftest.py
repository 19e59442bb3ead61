import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from robust_bundling import AmbiguityProblem, CurveDistribution, mechanism_for, minimize_guarantee

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def separate():
    """Two items sold separately, means (0.6, 0.5), variances 0.1 each."""
    return minimize_guarantee(AmbiguityProblem.point([0.6, 0.5], [0.1, 0.1]))


@pytest.fixture(scope="session")
def coarse():
    """Same items sold only as the grand bundle, bundle variance 0.1."""
    return minimize_guarantee(AmbiguityProblem.point([0.6, 0.5], [0.1], partition=[[0, 1]]))


@pytest.fixture(scope="session")
def separate_curve(separate):
    return CurveDistribution.from_solution(separate)


@pytest.fixture(scope="session")
def coarse_curve(coarse):
    return CurveDistribution.from_solution(coarse)


@pytest.fixture(scope="session")
def separate_mech(separate):
    return mechanism_for(separate)


@pytest.fixture(scope="session")
def coarse_mech(coarse):
    return mechanism_for(coarse)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
