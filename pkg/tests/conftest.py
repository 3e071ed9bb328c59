import re

import numpy as np
import pytest

from debunkd.netgen import from_edges, generate_scale_free

_acceptance: dict[str, str] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_graph():
    return generate_scale_free(60, 0.05, 0.8, 0.15, seed=7)


@pytest.fixture
def star():
    """Hub 0 followed by users 1..5."""
    return from_edges(6, [(0, i) for i in range(1, 6)])


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in _acceptance.items():
        name = nodeid.split("::")[-1]
        m = re.match(r"test_c(\d+)_(.*)", name)
        label = f"criterion {int(m.group(1)):2d} ({m.group(2)})" if m else name
        terminalreporter.write_line(f"{label}: {'PASS' if outcome == 'passed' else 'FAIL'}")
