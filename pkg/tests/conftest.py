import numpy as np
import pytest

from roughpdo.grid import Grid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid1():
    return Grid(1, 1.0, 256)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
