import pytest

_ACCEPTANCE: list[str] = []


@pytest.fixture
def record():
    """Collect one PASS/FAIL line per acceptance criterion."""

    def _record(number: int, title: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}")
        print(_ACCEPTANCE[-1])
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
