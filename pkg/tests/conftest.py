import pytest

_VERDICTS = []


class _Recorder:
    def __call__(self, number: int, name: str, passed: bool, detail: str = ""):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {name}" + (f" | {detail}" if detail else "")
        _VERDICTS.append((number, line))
        print(line)
        return passed


@pytest.fixture(scope="session")
def verdict():
    """Record one PASS/FAIL line per acceptance criterion; printed again in the terminal summary."""
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_VERDICTS, key=lambda x: x[0]):
        terminalreporter.write_line(line)
