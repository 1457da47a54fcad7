import pytest

_VERDICTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def verdict():
    """Record one criterion's outcome; the summary prints every recorded line."""

    def record(number: int, passed: bool, detail: str) -> bool:
        _VERDICTS[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        passed, detail = _VERDICTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
