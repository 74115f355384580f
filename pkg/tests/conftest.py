import pytest

# (criterion, passed, detail) rows collected by the acceptance tests
ACCEPTANCE = {}


@pytest.fixture
def record():
    def _record(criterion, passed, detail):
        ACCEPTANCE[criterion] = (bool(passed), detail)
        print(f"{criterion}: {'PASS' if passed else 'FAIL'} {detail}")
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE, key=lambda c: int(c.split("-")[1])):
        passed, detail = ACCEPTANCE[criterion]
        terminalreporter.write_line(f"{criterion} {'PASS' if passed else 'FAIL'}  {detail}")
