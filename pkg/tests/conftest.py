import numpy as np
import pytest

from cascadic_eig.assembly import example2, laplace
from cascadic_eig.cascadic import discretize
from cascadic_eig.dense_eig import direct_eigensolve
from cascadic_eig.mesh import build_hierarchy, structured_unit_square

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def laplace_disc():
    """Laplace on the structured 8x8 coarse mesh, six levels."""
    return discretize(build_hierarchy(structured_unit_square(8), 6), laplace)


@pytest.fixture(scope="session")
def example2_disc():
    return discretize(build_hierarchy(structured_unit_square(8), 5), example2)


@pytest.fixture(scope="session")
def laplace_direct(laplace_disc):
    """Direct first eigenpair on levels 1..5."""
    return [direct_eigensolve(laplace_disc[k].a, laplace_disc[k].b, 1) for k in range(1, 6)]


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, title, passed, detail):
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return record


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
