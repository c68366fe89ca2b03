import pytest

RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record a PASS/FAIL line for an acceptance criterion."""

    def record(number: int, ok: bool, detail: str = "") -> None:
        RESULTS[number] = (bool(ok), detail)
        print(f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())

    return record


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        ok, detail = RESULTS[k]
        terminalreporter.write_line(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
