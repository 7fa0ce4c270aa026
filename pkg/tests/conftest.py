import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lossycacc.model import VehicleParams  # noqa: E402
from shared import default_design  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def default_params():
    return VehicleParams()


@pytest.fixture(scope="session")
def platoon_design():
    return default_design()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
