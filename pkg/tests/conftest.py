import re

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criterion")


def pytest_runtest_logreport(report):
    match = re.search(r"test_criterion_(\d+)_(\w+)", report.nodeid)
    if not match or report.when == "teardown":
        return
    if report.when == "setup" and report.passed:
        return
    detail = dict(report.user_properties).get("detail", "")
    outcome = "PASS" if report.passed else "FAIL"
    _results[int(match.group(1))] = (outcome, match.group(2).replace("_", " "), detail)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        outcome, name, detail = _results[n]
        line = f"{outcome} criterion {n}: {name}"
        terminalreporter.write_line(f"{line} ({detail})" if detail else line)
