import sys
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

from mrrf import OpticalMedium, diagonalize  # noqa: E402

# lines printed by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def model_medium():
    return OpticalMedium.from_transport_units(0.5, 0.5)


@pytest.fixture(scope="session")
def small_decomp(model_medium):
    """l_max 4 with short blocks; enough for structural checks."""
    return diagonalize(model_medium, 4, block_dim=24)


@pytest.fixture(scope="session")
def greens_decomp(model_medium):
    return diagonalize(model_medium, 8, block_dim=200)
