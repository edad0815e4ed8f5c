import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("suite")

LEADER_B = np.array(
    [
        [2.0, 0.0, -1.0, -1.0],
        [0.0, 3.0, 0.0, 0.0],
        [-1.0, 0.0, 3.0, -1.0],
        [-1.0, 0.0, -1.0, 3.0],
    ]
)


@pytest.fixture
def leader_b():
    return LEADER_B.copy()


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance.summary_lines():
            terminalreporter.write_line(line)
