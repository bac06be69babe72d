import numpy as np
import pytest

from selfrepel.model import ModelSpec


@pytest.fixture
def canonical():
    return ModelSpec.canonical()


@pytest.fixture
def two_mode():
    return ModelSpec(2, (1.0, 0.5))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, shown in the terminal summary
ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = "criterion %2d: %s  %s" % (number, "PASS" if passed else "FAIL", detail)
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
