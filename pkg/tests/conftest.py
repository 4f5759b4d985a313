import pytest

_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _results.setdefault(number, {"title": title, "ok": True, "details": []})
    if rep.failed or (rep.when == "call" and rep.skipped):
        entry["ok"] = False
    if rep.when == "call":
        entry["details"] += [v for k, v in item.user_properties if k == "detail"]


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        e = _results[number]
        status = "PASS" if e["ok"] else "FAIL"
        detail = "; ".join(e["details"])
        terminalreporter.write_line(f"{status}  {number:>2}. {e['title']}" + (f"  [{detail}]" if detail else ""))
