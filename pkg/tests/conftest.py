import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for an acceptance criterion and assert on it."""
    lines = request.config.stash.setdefault(_LINES, [])

    def report(number, name, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number} {name}: {detail}"
        lines.append(line)
        print(line)
        assert passed, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split("criterion ")[1]):
            terminalreporter.write_line(line)
