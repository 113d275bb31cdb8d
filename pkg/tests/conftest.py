import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from gate import REPORT  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(REPORT):
        terminalreporter.write_line(REPORT[key])
