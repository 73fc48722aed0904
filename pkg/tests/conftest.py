import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hcolpath.hgraph import builtin  # noqa: E402


@pytest.fixture
def k3():
    return builtin("clique", 3)


@pytest.fixture
def iset():
    return builtin("independent_set")


ACCEPTANCE_LINES = []


def record_acceptance(label, ok, detail):
    line = f"criterion {label}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
