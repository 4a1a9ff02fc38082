import pytest

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance outcome: ``criterion(number, passed, detail)``."""

    def record(number, passed, detail):
        _CRITERIA.setdefault(number, []).append((bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        parts = _CRITERIA[number]
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {detail}")
