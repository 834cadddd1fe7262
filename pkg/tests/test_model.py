from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import convergent_specs, fractions, positive_specs
from qformation.model import (
    FormationSpec,
    Location,
    bit_budget,
    locate,
    quantize,
    sgn,
    speed_bound,
    validate_gains_convergence,
    validate_gains_equilibrium,
    vector_field_x,
    vector_field_z,
    x_to_z,
    z_to_x,
)

F = Fraction


def eq3_direct(z, spec):
    """Right-hand side of the z-dynamics written out term by term."""

    def s(v):
        return 1 if v >= 0 else -1

    q = [s(zi) * s(abs(zi) - di) for zi, di in zip(z, spec.d)]
    k, m = spec.k, spec.m
    out = []
    for i in range(m):
        v = -(k[i] + 1) * q[i]
        if i > 0:
            v += q[i - 1]
        if i < m - 1:
            v += k[i + 1] * q[i + 1]
        out.append(v)
    return tuple(out)


@pytest.mark.parametrize("v, expected", [(3.2, 1), (0, 1), (-0.1, -1)])
def test_sgn(v, expected):
    assert sgn(v) == expected


@pytest.mark.parametrize(
    "z, d, expected", [(2, 1, 1), (0.5, 1, -1), (0, 1, -1), (-1, 1, -1)]
)
def test_quantize(z, d, expected):
    assert quantize(z, d) == expected


def test_spec_validation():
    with pytest.raises(ValueError):
        FormationSpec([1, -1], [1, 1])
    with pytest.raises(ValueError):
        FormationSpec([1, 1], [1, 0])
    with pytest.raises(ValueError):
        FormationSpec([1], [1, 1])
    with pytest.raises(ValueError):
        FormationSpec.create(1, 1, [])
    spec = FormationSpec.create(4, "0.1", [3, 2, 1])
    assert spec.d == (F(1, 10),) * 3
    assert spec.n == 4


def test_matrix_layout():
    spec = FormationSpec([1, 1, 1, 1], [5, 4, 3, 2])
    assert spec.matrix == (
        (-6, 4, 0, 0),
        (1, -5, 3, 0),
        (0, 1, -4, 2),
        (0, 0, 1, -3),
    )


def test_vector_field_x_examples():
    spec = FormationSpec([1, 1], [1, 1])
    assert vector_field_x((4, 2, 0), spec) == (-1, 0, 1)
    assert vector_field_z(x_to_z((4, 2, 0)), spec) == (-1, -1)
    assert vector_field_x((1, 0), FormationSpec([1], [1])) == (-1, 1)


def test_vector_field_x_six_agent_start(six):
    x = (0, F(1, 2), 1, 2, 4, 5)
    z = x_to_z(x)
    assert z == (F(-1, 2), F(-1, 2), -1, -2, -1)
    q = [1 if (zi >= 0) == (abs(zi) >= 1) else -1 for zi in z]
    assert q == [1, 1, -1, -1, -1]
    # agent i: q_{i-1} - k_i q_i, evaluated by hand
    assert vector_field_x(x, six) == (-6, -4, 5, 2, 1, -1)


@pytest.mark.parametrize(
    "z, expected", [((2, 2), (-1, -1)), ((0.5, 2), (3, -3)), ((1, 1), (-1, -1))]
)
def test_vector_field_z_three_agents(unit3, z, expected):
    assert vector_field_z(z, unit3) == expected


def test_transforms():
    assert x_to_z((0, 0.5, 1, 2, 4, 5)) == (-0.5, -0.5, -1, -2, -1)
    assert z_to_x((-1, -1), 0) == (-2, -1, 0)
    assert x_to_z((3, 3, 3, 3)) == (0, 0, 0)


@pytest.mark.parametrize(
    "d, k, ok",
    [([1] * 5, [6, 5, 4, 3, 2], True), ([1, 1], [1, 3], False), ([1], [0.5], True)],
)
def test_validate_gains_equilibrium(d, k, ok):
    assert validate_gains_equilibrium(FormationSpec(d, k)) is ok


@pytest.mark.parametrize(
    "d, k, ok",
    [([1] * 5, [6, 5, 4, 3, 2], True), ([1, 1], [1, 1], True), ([1] * 3, [3, 2, 2], False)],
)
def test_validate_gains_convergence(d, k, ok):
    assert validate_gains_convergence(FormationSpec(d, k)) is ok


@pytest.mark.parametrize(
    "n, per_agent, total", [(6, (2, 4, 4, 4, 4, 2), 20), (2, (2, 2), 4), (3, (2, 4, 2), 8)]
)
def test_bit_budget(n, per_agent, total):
    b = bit_budget(n)
    assert b.per_agent == per_agent
    assert b.total == total == 4 * (n - 2) + 4
    assert b.stated_total == 4 * n - 2
    assert "4n-2" in b.describe()


def test_bit_budget_report_wording():
    assert "agents 2–5: 4 bits, agents 1 and 6: 2 bits" in bit_budget(6).describe()


@st.composite
def spec_and_x(draw):
    spec = draw(positive_specs())
    x = [draw(fractions(-6, 6, 4)) for _ in range(spec.n)]
    return spec, x


@given(spec_and_x())
def test_z_field_is_difference_of_x_field(data):
    spec, x = data
    vx = vector_field_x(x, spec)
    vz = vector_field_z(x_to_z(x), spec)
    assert vz == tuple(vx[i] - vx[i + 1] for i in range(spec.m))


@given(spec_and_x())
def test_matrix_form_matches_direct_evaluation(data):
    spec, x = data
    z = x_to_z(x)
    assert vector_field_z(z, spec) == eq3_direct(z, spec)


@given(spec_and_x())
def test_roundtrip_transforms(data):
    _, x = data
    x = tuple(x)
    assert z_to_x(x_to_z(x), x[-1]) == x
    z = x_to_z(x)
    assert x_to_z(z_to_x(z, F(7, 3))) == z


@given(fractions(Fraction(1, 4), 4), fractions(0, 1), st.sampled_from(list(Location)))
def test_quantizer_sign_table(d, frac, loc):
    # one representative point per location
    point = {
        Location.BELOW_NEG_D: -d - 1 - frac,
        Location.AT_NEG_D: -d,
        Location.NEG_INNER: -d * (1 + frac) / 3,
        Location.AT_ZERO: F(0),
        Location.POS_INNER: d * (1 + frac) / 3,
        Location.AT_POS_D: d,
        Location.ABOVE_POS_D: d + 1 + frac,
    }[loc]
    assert locate(point, d) is loc
    plus = point >= d or (-d < point < 0)
    assert quantize(point, d) == (1 if plus else -1)
    if loc.output is not None:
        assert quantize(point, d) == loc.output


@given(spec_and_x())
def test_speed_bound(data):
    spec, x = data
    bound = speed_bound(spec)
    k = spec.k
    for i, (v, b) in enumerate(zip(vector_field_z(x_to_z(x), spec), bound)):
        expected = (k[i] + 1) + (1 if i > 0 else 0) + (k[i + 1] if i + 1 < spec.m else 0)
        assert b == expected
        assert abs(v) <= b


@given(st.lists(fractions(Fraction(1, 4), 6, 4), min_size=1, max_size=6))
def test_convergence_gains_imply_equilibrium_gains(k):
    spec = FormationSpec([1] * len(k), k)
    if validate_gains_convergence(spec):
        assert validate_gains_equilibrium(spec)


@given(convergent_specs())
def test_strategy_produces_convergent_gains(spec):
    assert validate_gains_convergence(spec)
