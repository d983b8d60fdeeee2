import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.controllers.kkt_builder import build_lp_system, lp_coefficients  # noqa: E402
from src.models.programs import LpProblem  # noqa: E402

settings.register_profile("fast", max_examples=25, deadline=None)
settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run Monte Carlo reproductions")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo or full-grid reproductions")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def intersection_bounds(x_bar=(5.0, 3.0), V=None, n=100):
    """Problem, coefficients and moment system for theta = max(x_bar)."""
    problem = LpProblem(A=[[-1.0], [-1.0]], b=-np.asarray(x_bar, dtype=float), c=[-1.0])
    est = lp_coefficients(problem, ['b'], np.eye(2) if V is None else V, n)
    return problem, est, build_lp_system(problem, est)


def two_by_two_lp(b=(4.0, 1.0), c=(3.0, 2.0), variance=1.0, n=100):
    """The estimated 2x2 LP with theta >= 0 and every coefficient stochastic."""
    problem = LpProblem(A=[[1.0, 2.0], [1.0, -1.0]], b=b, c=c, nonneg=True)
    est = lp_coefficients(problem, ['A', 'b', 'c'], variance * np.eye(8), n)
    return problem, est, build_lp_system(problem, est)


@pytest.fixture
def sim1():
    return intersection_bounds()


@pytest.fixture
def sim2():
    return two_by_two_lp()
