import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from plyse.config import load_params

settings.register_profile("default", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    return load_params()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One line per acceptance criterion, collected by tests/test_acceptance.py and
# printed at the end of the session so they survive output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
