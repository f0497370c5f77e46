import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from ddsgd.network import lattice2d, make_mixing  # noqa: E402
from ddsgd.objectives import synthetic_problem  # noqa: E402
from ddsgd.solver import centralized_reference  # noqa: E402


class LatticeFixture:
    """Least-squares data on a 5x5 lattice: m=25, n=10, p=5, R=1, eta=0.01."""

    def __init__(self, sigma):
        self.problem = synthetic_problem("ls", 25, n=10, p=5, seed=1, sigma=sigma)
        self.mixing = make_mixing(lattice2d(5, 5), "metropolis", lazy=True)
        self.reference = centralized_reference(self.problem)
        self.eta = 0.01


@pytest.fixture(scope="session")
def lattice_ls():
    return LatticeFixture(sigma=0.01)


@pytest.fixture(scope="session")
def lattice_ls_exact():
    return LatticeFixture(sigma=0.0)


ACCEPTANCE_LINES = []


def record_acceptance(number, passed, text):
    ACCEPTANCE_LINES.append((number, passed, text))
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, text in sorted(ACCEPTANCE_LINES, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {text}")
