import pytest

_REPORT = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion.

    ``acceptance(n, ok, detail)`` stores the verdict; the lines are printed in
    the terminal summary so they survive output capturing.
    """
    report = request.config.stash.setdefault(_REPORT, {})

    def record(n: int, ok: bool, detail: str) -> bool:
        report[n] = (bool(ok), detail)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    report = config.stash.get(_REPORT, {})
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(report):
        ok, detail = report[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
