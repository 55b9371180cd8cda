import pytest

_CRITERIA = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    for mark, value in report.user_properties:
        if mark == "criterion":
            _CRITERIA[value] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda n: int(n.split()[0][2:])):
        terminalreporter.write_line(f"[{_CRITERIA[name]}] {name}")


@pytest.fixture
def criterion(record_property):
    def tag(name):
        record_property("criterion", name)

    return tag
