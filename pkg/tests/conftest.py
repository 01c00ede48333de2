import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.load_profile("default")

_VERDICTS = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for the acceptance summary, then assert it."""

    def record(label, ok, detail):
        _VERDICTS.append((label, bool(ok), detail))
        assert ok, f"{label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(_VERDICTS, key=lambda v: int(v[0].split()[1])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
