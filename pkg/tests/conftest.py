from pathlib import Path

import numpy as np
import pytest

from ratecache import fixtures
from ratecache.singleuser import TracerConfig, trace_boundary

FIXTURE_DIR = Path(__file__).parent / "fixtures"

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def fixture_dir():
    return FIXTURE_DIR


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_TRACE_CACHE = {}

FIXTURE_PROBLEMS = {
    "indep_bits_60_40": lambda: fixtures.independent_bits_selector((0.6, 0.4)),
    "two_fair_bits": fixtures.independent_bits_selector,
    "nested": fixtures.nested_selector,
    "xor": fixtures.xor_problem,
    "dsbs_0.1": lambda: fixtures.dsbs_selector(0.1),
}


def traced(name):
    """Default-config trace of a named fixture, computed once per session."""
    if name not in _TRACE_CACHE:
        problem = FIXTURE_PROBLEMS[name]()
        _TRACE_CACHE[name] = (problem, trace_boundary(problem, TracerConfig()))
    return _TRACE_CACHE[name]


@pytest.fixture(scope="session")
def traced_boundary():
    return traced
