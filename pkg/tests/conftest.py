import pytest

# one line per acceptance criterion, filled in by tests/test_acceptance.py
CRITERIA_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA_LINES):
        terminalreporter.write_line(CRITERIA_LINES[key])


@pytest.fixture
def criterion():
    """Record and print the outcome of an acceptance criterion."""

    def record(key: str, ok: bool, detail: str):
        line = f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}"
        CRITERIA_LINES[key] = line
        print(line)
        return ok

    return record
