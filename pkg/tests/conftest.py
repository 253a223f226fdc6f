import pytest

_ACCEPTANCE = {}


@pytest.fixture
def record():
    """Record one acceptance verdict: ``record(k, passed, detail)``."""

    def _record(k, passed, detail):
        line = f"[criterion {k:>2}] {'PASS' if passed else 'FAIL'}: {detail}"
        _ACCEPTANCE[k] = line
        print(line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
