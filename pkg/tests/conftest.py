import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fbms import catenoid

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def critical():
    return catenoid.solve_critical_catenoid()


@pytest.fixture(scope="session")
def coarse_catenoid(critical):
    return catenoid.revolve_to_mesh(critical.a, critical.h, 32, 16)


@pytest.fixture(scope="session")
def small_disc():
    return catenoid.disc_mesh(0.0, 12)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines():
        terminalreporter.write_line(line)
