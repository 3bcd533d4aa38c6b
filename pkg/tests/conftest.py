import numpy as np
import pytest

from horngauge import reference_polynomial
from horngauge.fpflow import FamilyPolynomial
from horngauge.homotopy import trace_link_loop
from horngauge.wpoly import Polynomial

ACCEPTANCE_LINES: list[str] = []


def poly(*terms) -> Polynomial:
    """``poly((1, (2, 0, 0)), (1, (0, 3, 0)))`` -> x^2 + y^3."""
    return Polynomial((tuple(e), c) for c, e in terms)


BRIESKORN = [(1, (2, 0, 0)), (1, (0, 3, 0)), (1, (0, 0, 5))]


@pytest.fixture(scope="session")
def ref():
    return reference_polynomial()


@pytest.fixture(scope="session")
def fam(ref):
    return FamilyPolynomial(ref)


@pytest.fixture(scope="session")
def ref_loop(ref):
    return trace_link_loop(ref.h, ref.weights)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
