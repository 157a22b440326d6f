import sys
import time

import numpy as np
import pytest

from plaplab.geometry import DomainSpec, WeightSpec, make_grid, weight_tables
from plaplab.solvers import solve_buckling, solve_clamped_plate, solve_linear_dirichlet

SESSION_START = time.perf_counter()
ACCEPTANCE_MODULE = "test_acceptance"


def pytest_collection_modifyitems(items):
    # acceptance criteria run last; criterion 11 times the whole session
    items.sort(key=lambda item: item.module.__name__ == ACCEPTANCE_MODULE)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get(ACCEPTANCE_MODULE)
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, title, detail = results[n]
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(f"{line}  ({detail})" if detail else line)
    passed = sum(ok for ok, _, _ in results.values())
    terminalreporter.write_line(f"{passed}/{len(results)} criteria passed")


def interval_weight(n, spec=None, a=0.0, b=1.0):
    grid = make_grid(DomainSpec.interval(a, b, n))
    return weight_tables(spec or WeightSpec.zero(), grid)


def square_weight(n, spec=None):
    grid = make_grid(DomainSpec.rectangle(0, 1, 0, 1, n))
    return weight_tables(spec or WeightSpec.zero(), grid)


@pytest.fixture(scope="session")
def w512():
    return interval_weight(512)


@pytest.fixture(scope="session")
def dirichlet512(w512):
    return solve_linear_dirichlet(w512.grid, w512)


@pytest.fixture(scope="session")
def plate512(w512):
    return solve_clamped_plate(w512.grid, w512)


@pytest.fixture(scope="session")
def buckling512(w512):
    return solve_buckling(w512.grid, w512)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
