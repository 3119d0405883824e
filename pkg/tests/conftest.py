import pytest

_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_CRITERIA] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(number, passed, detail)``.

    A test that errors before recording is reported as a failure.
    """
    table = request.config.stash[_CRITERIA]
    number = request.node.get_closest_marker("criterion").args[0]

    def record(passed, detail):
        table[number] = (bool(passed), detail)

    yield record
    table.setdefault(number, (False, "did not complete"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_CRITERIA, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(table):
        passed, detail = table[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
