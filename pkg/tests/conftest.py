import pytest

from lfts.scenario import load_scenario

_CRITERIA: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "acceptance" not in report.keywords:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        label = report.head_line.split(".")[-1].removeprefix("test_")
        _CRITERIA[label] = ("PASS" if report.passed else "FAIL", report.nodeid)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_CRITERIA, key=lambda s: int(s.split("_")[0][2:])):
        verdict, _ = _CRITERIA[label]
        terminalreporter.write_line(f"{verdict}  {label}")


@pytest.fixture(scope="session")
def figure1():
    """Verbatim reading: a reservation marks every block of the route occupied."""
    return load_scenario("figure1").system


@pytest.fixture(scope="session")
def figure1_free():
    """Two-phase reading: a reservation leaves block status free."""
    return load_scenario("figure1", None, {"reservationKeepsFirstFree": True}).system
