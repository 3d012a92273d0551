import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_LINES = {}


@pytest.fixture
def record():
    """``record(n, passed, detail)`` stores the verdict line for criterion ``n``."""

    def _rec(n, passed, detail=""):
        _LINES[n] = f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
        print(_LINES[n])
        return passed

    return _rec


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_LINES):
        terminalreporter.write_line(_LINES[n])
