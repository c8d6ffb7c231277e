import numpy as np
import pytest

from foodchain.model import HOLLING_DEFAULT, IVLEV_DEFAULT

# lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def holling():
    return HOLLING_DEFAULT


@pytest.fixture
def ivlev():
    return IVLEV_DEFAULT


@pytest.fixture(params=["holling", "ivlev"])
def family(request):
    return HOLLING_DEFAULT if request.param == "holling" else IVLEV_DEFAULT


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
