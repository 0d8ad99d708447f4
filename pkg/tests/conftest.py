import numpy as np
import pytest

from singplap.mesh import default_mesh
from singplap.problem import Interval, ProblemSpec, ReactionSpec, validate_problem
from singplap.solver1d import solve_radial


def make_problem(p=2.0, gamma=3.0, theta=0.0, q=1.0, reaction=None, domain=None):
    return validate_problem(ProblemSpec(p=p, gamma=gamma, q=q, theta=theta,
                                        reaction=reaction or ReactionSpec.zero(),
                                        domain=domain or Interval(1.0)))


def solve_interval(p=2.0, gamma=3.0, theta=0.0, q=1.0, n=4096):
    pr = make_problem(p, gamma, theta, q)
    return pr, solve_radial(pr, default_mesh(pr.domain, n))


@pytest.fixture(scope="session")
def strong_solution():
    return solve_interval(2.0, 3.0)


@pytest.fixture(scope="session")
def critical_solution():
    return solve_interval(2.0, 1.0)


@pytest.fixture(scope="session")
def weak_solution():
    return solve_interval(2.0, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        ok, detail = RESULTS[key]
        terminalreporter.write_line(f"criterion {key:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
