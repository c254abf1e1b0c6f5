import sys

import pytest

from rough_heston.kernels import FractionalPowerLaw
from rough_heston.model import EXPERIMENT_PARAMS


@pytest.fixture(scope="session")
def rough_kernel():
    return FractionalPowerLaw.gamma_normalized(0.1)


@pytest.fixture(scope="session")
def params():
    return EXPERIMENT_PARAMS


def pytest_terminal_summary(terminalreporter):
    lines = []
    for name, mod in list(sys.modules.items()):
        if name.rsplit(".", 1)[-1] == "test_acceptance":
            lines.extend(getattr(mod, "RESULTS", []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
