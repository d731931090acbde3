import time
from fractions import Fraction

import numpy as np
import pytest

from diseconomy.instances import parallel_gap
from diseconomy.polytopes import (Demand, Edge, LoadBalancingInstance, RoutingInstance,
                                  SchedulingInstance, TreeInstance)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def gap4():
    return parallel_gap(4, 2)


@pytest.fixture
def triangle():
    return TreeInstance(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)], Fraction(2))


@pytest.fixture
def lb_uniform():
    return LoadBalancingInstance([[1, 1], [1, 1]], Fraction(2))


@pytest.fixture
def grid_routing():
    """2x2 grid, 0 -> 3 along two routes, unit demand."""
    edges = [Edge("a", 0, 1), Edge("b", 1, 3), Edge("c", 0, 2), Edge("d", 2, 3)]
    return RoutingInstance(4, edges, [Demand(1, 0, 3)])


@pytest.fixture
def one_job_schedule():
    return SchedulingInstance([[2]], [Fraction(1)], Fraction(1), horizon=4)


# ---------------------------------------------------------------------------
# Acceptance criteria: one pass/fail line per criterion in the terminal summary
# ---------------------------------------------------------------------------

_ACCEPTANCE: dict[int, tuple[str, str, float, float, str]] = {}


class _Criterion:
    def __init__(self, number, title, limit):
        self.number, self.title, self.limit = number, title, limit
        self.notes = []

    def note(self, text):
        self.notes.append(str(text))

    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self._t0
        status = "PASS"
        if exc_type is not None:
            status = "FAIL"
            self.notes.append(f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
        elif elapsed >= self.limit:
            status = "FAIL"
            self.notes.append(f"runtime {elapsed:.2f}s exceeds {self.limit:g}s")
        _ACCEPTANCE[self.number] = (self.title, status, elapsed, self.limit, "; ".join(self.notes))
        if exc_type is None and status == "FAIL":
            raise AssertionError(f"criterion {self.number} ran {elapsed:.2f}s, limit {self.limit:g}s")
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        title, status, elapsed, limit, notes = _ACCEPTANCE[k]
        line = f"[{status}] criterion {k:>2}: {title} ({elapsed:.2f}s, limit {limit:g}s)"
        terminalreporter.write_line(line + (f" -- {notes}" if notes else ""))
