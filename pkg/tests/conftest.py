import pytest

_results: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    entry = _results.setdefault(n, [title, True, False])
    if report.when == "call" or report.failed:
        entry[2] = True
        if report.failed:
            entry[1] = False


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        title, ok, ran = _results[n]
        status = "PASS" if ok and ran else ("FAIL" if ran else "SKIP")
        terminalreporter.write_line(f"criterion {n:2d} {status}  {title}")
