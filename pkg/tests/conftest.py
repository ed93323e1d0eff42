import pytest

_LINES = []


@pytest.fixture
def criterion():
    """Report one acceptance criterion as a PASS/FAIL line, then assert it."""
    def report(number, title, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:2d}  {title}: {detail}"
        _LINES.append((number, line))
        print(line)
        assert ok, line
    return report


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for _, line in sorted(_LINES):
        terminalreporter.write_line(line)
