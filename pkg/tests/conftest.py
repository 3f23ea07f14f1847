import pytest

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def record():
    """Register the outcome of one acceptance criterion for the summary block."""
    def _record(label: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE[label] = (bool(passed), detail)
        print(f"{label}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE, key=lambda s: (len(s.split()[1].rstrip("abcdefgh:")), s)):
        ok, detail = _ACCEPTANCE[label]
        terminalreporter.write_line(f"{label}: {'PASS' if ok else 'FAIL'}  {detail}")
