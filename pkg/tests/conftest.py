import numpy as np
import pytest

from ioncool import paper_scenario
from ioncool.optimize import detuning_scan, scan_values

# cyclic Hz
STRONG_REPUMP = {"rabi_650": 89.6e6, "rabi_493": 2.1e6, "detuning_493": -0.21e6}
DRIFT_SET = {"rabi_650": 59.5e6, "rabi_493": 3.8e6, "detuning_493": -10.9e6}


@pytest.fixture(scope="session")
def fitted():
    return paper_scenario()


@pytest.fixture(scope="session")
def fitted_scan(fitted):
    """y~ cooling scan with the fitted parameters, 0.1 MHz steps."""
    return detuning_scan(fitted, scan_values(-70e6, 30e6, 0.1e6), "650", "y~")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
