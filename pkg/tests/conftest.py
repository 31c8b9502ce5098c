import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from ergomfg.domain import Interval, RadialDisk, build_grid  # noqa: E402
from ergomfg.fokker_planck import solve_fp  # noqa: E402
from ergomfg.hjb import HjbProblem, solve_ergodic_hjb  # noqa: E402

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion and assert it."""

    def record(number, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:2d}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return record


@pytest.fixture(scope="session")
def unit_grid():
    return build_grid(Interval(0.0, 1.0), 512, 1.0 / 128)


@pytest.fixture(scope="session")
def hopf_cole(unit_grid):
    """The p=2, f=0 problem on (0, 1) with its HJB and FP solutions."""
    g = unit_grid
    problem = HjbProblem(g, 2.0, np.zeros(g.size))
    sol = solve_ergodic_hjb(problem)
    fp = solve_fp(sol.drift_b, g)
    return g, problem, sol, fp


@pytest.fixture(scope="session")
def disk_solution():
    g = build_grid(RadialDisk(1.0, 2), 512, 1.0 / 128)
    problem = HjbProblem(g, 2.0, np.zeros(g.size))
    return g, problem, solve_ergodic_hjb(problem)
