import pytest

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion as PASS/FAIL, print it, then assert."""
    def record(number, ok, detail=""):
        ok = bool(ok)
        _CRITERIA[number] = (ok, detail)
        print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
