import pytest

from atomchip_sta import reproduce as rp

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def ctx():
    """Preset chip and species with trap tables built once per session."""
    c = rp.Context.load()
    c.tables
    return c


@pytest.fixture(scope="session")
def tables(ctx):
    return ctx.tables


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
