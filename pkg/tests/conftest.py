import pytest

# criterion number -> list of (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def criterion():
    def record(number, passed, detail):
        ACCEPTANCE.setdefault(number, []).append((bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        results = ACCEPTANCE[number]
        status = "PASS" if all(ok for ok, _ in results) else "FAIL"
        details = "; ".join(detail for _, detail in results)
        terminalreporter.write_line(f"criterion {number}: {status} ({details})")
