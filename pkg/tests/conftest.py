import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): numbered acceptance criterion")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, text = mark.args
    ok = rep.passed if rep.when == "call" else (None if rep.passed else False)
    prev = item.config._criteria.get(n, (text, True))
    if ok is not None:
        item.config._criteria[n] = (text, prev[1] and ok)
    elif n not in item.config._criteria:
        item.config._criteria[n] = prev


def pytest_terminal_summary(terminalreporter, config):
    if not config._criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(config._criteria):
        text, ok = config._criteria[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}: {text}")
