import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# one line per acceptance criterion, shown in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    def emit(criterion, passed, detail):
        line = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
