"""Acceptance reporting: one PASS/FAIL line per numbered criterion."""
import pytest

_RESULTS: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        verdict = "PASS" if rep.passed else "FAIL"
        detail = ""
        if rep.failed:
            detail = str(rep.longrepr.reprcrash.message).splitlines()[0] if hasattr(rep.longrepr, "reprcrash") else "error"
        elif rep.skipped:
            verdict = "SKIP"
        _RESULTS[number] = (verdict, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_RESULTS):
        verdict, title, detail = _RESULTS[n]
        line = f"{verdict} criterion {n:2d}: {title}"
        if detail:
            line += f"  ({detail})"
        tr.write_line(line)
    passed = sum(v == "PASS" for v, _, _ in _RESULTS.values())
    tr.write_line(f"{passed}/{len(_RESULTS)} acceptance criteria passed")
