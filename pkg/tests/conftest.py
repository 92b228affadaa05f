import time

import numpy as np
import pytest
from hypothesis import settings

from dengue_moo import Evaluator, compute_anchors
from dengue_moo.scalarize import approximate_pareto

settings.register_profile("repo", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("repo")

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def evaluator():
    return Evaluator()


@pytest.fixture(scope="session")
def anchors(evaluator):
    return compute_anchors(evaluator)


class _Runs:
    """Full 100-subproblem fronts, computed once per method and shared."""

    def __init__(self, anchors):
        self.anchors = anchors
        self.archives = {}
        self.seconds = {}

    def __call__(self, method):
        if method not in self.archives:
            start = time.perf_counter()
            # anchors are recomputed inside so the timing covers the whole run
            self.archives[method] = approximate_pareto(method, 100)
            self.seconds[method] = time.perf_counter() - start
        return self.archives[method]


@pytest.fixture(scope="session")
def pareto_runs(anchors):
    return _Runs(anchors)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
