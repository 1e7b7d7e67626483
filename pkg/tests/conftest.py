import pytest

# criterion number -> (title, outcome)
_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            n, title = mark.args
            _ACCEPTANCE.setdefault(n, [title, None])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    entry = _ACCEPTANCE[mark.args[0]]
    if report.when == "setup" and not report.passed:
        entry[1] = "FAIL"
    elif report.when == "call" and entry[1] != "FAIL":
        entry[1] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, result = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {result or 'NOT RUN'}  {title}")
