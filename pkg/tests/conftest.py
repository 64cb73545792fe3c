import sys

import pytest
from hypothesis import HealthCheck, settings

from syndcim.library import load_reference_library

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def lib():
    return load_reference_library()


@pytest.fixture(scope="session")
def cells(lib):
    return lib.cells_at("0v9")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
