import os
import re

import pytest
from hypothesis import HealthCheck, settings

from habitat_waves.config import RunConfig
from habitat_waves.grid import Grid
from habitat_waves.growth import GrowthModel
from habitat_waves.kernels import ConvolutionOperator, gaussian

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

os.environ.setdefault("HABITAT_WAVES_THREADS", "1")


@pytest.fixture(scope="session")
def kernel():
    return gaussian(1.0)


@pytest.fixture(scope="session")
def small_grid():
    # coarse but admissible: dx = 0.1 < support/8
    return Grid(30.0, 601)


@pytest.fixture(scope="session")
def small_op(kernel, small_grid):
    return ConvolutionOperator.build(kernel, small_grid.dx, small_grid.n)


@pytest.fixture(scope="session")
def default_config():
    return RunConfig.from_dict({})


@pytest.fixture
def growth():
    return GrowthModel(1.0, 1.0, 5.0, 1.0)


_CRITERION = re.compile(r"test_c(\d+)_")


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call" or "test_acceptance" not in rep.nodeid:
                continue
            m = _CRITERION.search(rep.nodeid)
            if not m:
                continue
            props = dict(rep.user_properties)
            detail = props.get("detail", "no measurement recorded")
            lines.append((int(m.group(1)), f"{outcome.upper()[:4]:4s} criterion {int(m.group(1)):2d}: "
                                           f"{props.get('title', '')} | {detail}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
