import numpy as np
import pytest
from hypothesis import settings

from lavreg.grid import make_uniform_grid

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid100():
    return make_uniform_grid(100)


@pytest.fixture(scope="session")
def grid1000():
    return make_uniform_grid(1000)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(results):
        ok, detail = results[criterion]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {criterion:2d}: {detail}")
