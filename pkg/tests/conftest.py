import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=15, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split()[0])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def flat_torus():
    from shla.chart import builtin_flat_torus
    return builtin_flat_torus()


@pytest.fixture(scope="session")
def oscillator():
    from shla.chart import builtin_oscillator
    return builtin_oscillator()


@pytest.fixture(scope="session")
def curved_k1r3():
    from shla.randgen import random_torus_chart
    return random_torus_chart(1, 3, 11, nterms=1)


@pytest.fixture(scope="session")
def curved_k1r2():
    from shla.randgen import random_torus_chart
    return random_torus_chart(1, 2, 5, nterms=1)
