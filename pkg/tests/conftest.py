"""Shared pytest configuration: per-criterion summary for the acceptance suite."""

_CRITERIA = {}
_OUTCOMES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _CRITERIA[item.nodeid] = mark.args


def pytest_runtest_logreport(report):
    if report.nodeid not in _CRITERIA:
        return
    failed = report.failed or (report.when == "call" and report.skipped)
    if failed or report.when == "call":
        previous = _OUTCOMES.get(report.nodeid)
        _OUTCOMES[report.nodeid] = "FAIL" if failed or previous == "FAIL" else "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    by_number = {}
    for nodeid, (number, title) in _CRITERIA.items():
        if nodeid in _OUTCOMES:
            entry = by_number.setdefault(number, [title, "PASS"])
            if _OUTCOMES[nodeid] == "FAIL":
                entry[1] = "FAIL"
    terminalreporter.section("acceptance criteria")
    for number in sorted(by_number):
        title, status = by_number[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")

