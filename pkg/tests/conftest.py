"""Per-criterion PASS/FAIL summary for the acceptance suite."""

import pytest

_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _results.setdefault(number, {"title": title, "ok": True, "parts": []})
    if report.when == "call" or report.failed:
        entry["ok"] = entry["ok"] and report.passed
        entry["parts"].append((item.name, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_results):
        entry = _results[number]
        status = "PASS" if entry["ok"] else "FAIL"
        tr.write_line(f"criterion {number:>2}: {status}  {entry['title']}")
        if not entry["ok"]:
            for name, ok in entry["parts"]:
                if not ok:
                    tr.write_line(f"              failing check: {name}")
