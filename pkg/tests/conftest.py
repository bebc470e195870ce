import pytest

_CRITERIA: dict[int, tuple[str, str, str]] = {}


class CriterionLog:
    """Collects one status line per acceptance criterion."""

    def record(self, number: int, title: str, ok, detail: str = "") -> None:
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        _CRITERIA[number] = (status, title, detail)
        print(f"[{status}] criterion {number}: {title}  {detail}")


@pytest.fixture(scope="session")
def criteria():
    return CriterionLog()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        terminalreporter.write_line(f"[{status}] {number:2d}. {title}  {detail}")
