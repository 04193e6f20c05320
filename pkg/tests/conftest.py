import pytest

_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line: ``report(number, passed, detail)``."""
    def add(number, passed, detail):
        _LINES.append((number, bool(passed), detail))
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
    return add


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_LINES, key=lambda x: x[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {detail}")
