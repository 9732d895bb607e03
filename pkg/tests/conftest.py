import sys

import pytest

from fstirap import reference_geometry


@pytest.fixture
def geom():
    """Half-passage operating point."""
    return reference_geometry()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
