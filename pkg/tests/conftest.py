import warnings

import pytest

from magnonqed import hybrid, params


@pytest.fixture(scope="session")
def canonical():
    return params.canonical()


@pytest.fixture(scope="session")
def derived(canonical):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return hybrid.derive(canonical.system, canonical.layout(), canonical.experiment.probe_mode)


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
