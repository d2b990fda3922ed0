import pytest

from qfl import acceptance

# CheckResults collected by test_acceptance, echoed after the run
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def ctx():
    """Shared solution, families, integrals and natural systems at the defaults."""
    return acceptance.Context()


@pytest.fixture(scope="session")
def sol(ctx):
    return ctx.psi


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for r in sorted(ACCEPTANCE_LINES, key=lambda r: r.cid):
            terminalreporter.write_line(r.line())
