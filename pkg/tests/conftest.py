import pytest

ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record a one-line pass/fail verdict for an acceptance criterion."""
    entry = {"name": request.node.name, "detail": ""}
    ACCEPTANCE.append(entry)

    def note(detail):
        entry["detail"] = detail

    yield note
    entry.setdefault("passed", None)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        for entry in ACCEPTANCE:
            if entry["name"] == item.name:
                entry["passed"] = rep.passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for e in ACCEPTANCE:
        verdict = "PASS" if e.get("passed") else "FAIL"
        terminalreporter.write_line(f"{verdict}  {e['name']}  {e['detail']}")
