import pytest

# acceptance lines collected by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_line():
    def record(label, ok, detail):
        line = "%s %s: %s" % ("PASS" if ok else "FAIL", label, detail)
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
