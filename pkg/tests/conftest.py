import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nfisac.geometry import build_cross_array, build_frequency_grid

settings.register_profile("nfisac", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("nfisac")

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
CARRIER = 4.9e9


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_array():
    return build_cross_array(4, 4, CARRIER)


@pytest.fixture(scope="session")
def small_grid():
    return build_frequency_grid(CARRIER, k_total=16, k_selected=4)


@pytest.fixture
def data_path():
    return lambda name: os.path.join(DATA_DIR, name)


# one PASS/FAIL line per acceptance criterion, printed after the test report
ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    def record(label, ok, detail=""):
        status = "PASS" if ok is True else ("FAIL" if ok is False else str(ok))
        ACCEPTANCE_LINES.append(f"{status} {label}: {detail}".rstrip(": "))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
