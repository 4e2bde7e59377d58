import pytest

from levyepi.scenario import preset

_ACCEPTANCE = []


@pytest.fixture
def record_criterion():
    """Log one pass/fail line per acceptance criterion and assert on it."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def extinction():
    return preset("table1-extinction")


@pytest.fixture(scope="session")
def persistence():
    return preset("table1-persistence")
