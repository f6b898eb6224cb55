import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.fixture
def measured(request):
    """Attach a measurement string to the running acceptance test."""
    def record(text):
        request.node.measured = text
    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    if hasattr(rep, "wasxfail"):
        ok = False                     # expected failure: criterion not met
    elif rep.failed and "XPASS(strict)" in str(rep.longrepr):
        ok = True                      # criterion met although marked as a known red
    else:
        ok = rep.passed
    _CRITERIA[mark.args[0]] = (ok, getattr(item, "measured", "no measurement recorded"))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, text = _CRITERIA[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {text}")
