import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from beclab.model import Grid
from beclab.profiles import ModelSpec, Profile

settings.register_profile("beclab", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("beclab")


@pytest.fixture
def dirac_tanh():
    return ModelSpec("dirac", Profile.tanh(-1.0, 1.0, 1.0))


@pytest.fixture
def sw_sign():
    return ModelSpec("shallow_water", Profile.sign(1.0))


@pytest.fixture
def small_grid():
    return Grid(12.0, 0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line, then assert the outcome."""
    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
