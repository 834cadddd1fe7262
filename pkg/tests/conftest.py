from fractions import Fraction

import pytest
from hypothesis import strategies as st

from qformation.model import FormationSpec


def fractions(lo, hi, denom=8):
    return st.fractions(min_value=lo, max_value=hi, max_denominator=denom)


@st.composite
def convergent_specs(draw, min_n=2, max_n=6):
    """Specs whose gains satisfy the convergence conditions."""
    n = draw(st.integers(min_n, max_n))
    m = n - 1
    d = [draw(fractions(Fraction(1, 2), 2)) for _ in range(m)]
    k = [Fraction(0)] * m
    k[-1] = 1 + draw(fractions(0, 2, 4))
    for i in range(m - 2, 0, -1):
        k[i] = k[i + 1] + 1 + draw(fractions(0, 2, 4))
    if m >= 2:
        k[0] = k[1] + draw(fractions(0, 2, 4))
    return FormationSpec(d, k)


@st.composite
def positive_specs(draw, min_n=2, max_n=6):
    n = draw(st.integers(min_n, max_n))
    d = [draw(fractions(Fraction(1, 2), 2)) for _ in range(n - 1)]
    k = [draw(fractions(Fraction(1, 4), 8, 4)) for _ in range(n - 1)]
    return FormationSpec(d, k)


@pytest.fixture
def unit3():
    return FormationSpec([1, 1], [1, 1])


@pytest.fixture
def six():
    return FormationSpec.create(6, 1, [6, 5, 4, 3, 2])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
