import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("fthresh", deadline=None, derandomize=True, max_examples=50)
settings.load_profile("fthresh")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)



ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
