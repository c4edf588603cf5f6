import pytest

_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_KEY] = {}


@pytest.fixture
def verdict(request):
    """Record a one-line PASS/FAIL verdict for an acceptance criterion."""
    table = request.config.stash[_KEY]

    def record(number: int, name: str, ok: bool, detail: str = ""):
        table[number] = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip()
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_KEY, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(table):
        terminalreporter.write_line(table[n])
