import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from conftest import fractions, positive_specs
from qformation.hull import (
    Equilibrium,
    SingularSystemError,
    classify_equilibrium,
    contains_zero,
    hull_at,
    is_equilibrium_analytic,
    solve_exact,
)
from qformation.model import FormationSpec, matvec, validate_gains_equilibrium, vector_field_z

F = Fraction


def sampled_hull_contains_zero(z, spec, delta=F(1, 10**6)):
    """Independent check: collect f over a small neighbourhood of z and
    test whether 0 is a convex combination of the collected values."""
    values = set()
    for signs in itertools.product((-1, 0, 1), repeat=len(z)):
        p = [zi + s * delta for zi, s in zip(z, signs)]
        values.add(vector_field_z(p, spec))
    pts = np.array([[float(v) for v in val] for val in values])
    k = len(pts)
    a_eq = np.vstack([pts.T, np.ones(k)])
    b_eq = np.concatenate([np.zeros(pts.shape[1]), [1.0]])
    res = linprog(np.zeros(k), A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * k, method="highs")
    return res.status == 0


def surface_grid(d):
    """Grid mixing surface values with off-surface ones."""
    return sorted({-2 * d, -d, -d / 2, F(0), d / 2, d, 2 * d})


def test_solve_exact():
    assert solve_exact([[2, 1], [1, 3]], [3, 5]) == (F(4, 5), F(7, 5))
    assert solve_exact([[1], [1]], [1, 2]) is None
    with pytest.raises(SingularSystemError):
        solve_exact([[1, 2], [2, 4]], [1, 2])


def test_semi_axis_box(unit3):
    h = hull_at((1, 2), unit3)
    assert h.q_box == ((-1, 1), (1, 1))
    assert h.active == (0,)
    assert sorted(h.vertices()) == [(-1, -1), (3, -3)]
    assert contains_zero(h) == (False, None)


def test_desired_point_vertex_values(unit3):
    h = hull_at((1, 1), unit3)
    verts = h.vertices()
    assert matvec(unit3.matrix, (1, 1)) == (-1, -1)
    assert sorted(verts) == sorted([(-1, -1), (3, -3), (-3, 3), (1, 1)])
    ok, witness = contains_zero(h)
    assert ok and witness == (0, 0)


@pytest.mark.parametrize(
    "z, expected",
    [
        ((1, 1), Equilibrium.DESIRED),
        ((-1, 1), Equilibrium.DESIRED),
        ((0, 1), Equilibrium.DEGENERATE),
        ((0, 0), Equilibrium.DEGENERATE),
        ((2, 2), Equilibrium.NOT_EQUILIBRIUM),
        ((1, 2), Equilibrium.NOT_EQUILIBRIUM),
    ],
)
def test_classify_equilibrium(unit3, z, expected):
    assert classify_equilibrium(z, unit3).tag is expected


def test_snap_tolerance(unit3):
    z = (F(1) + F(1, 10**9), F(-1))
    assert classify_equilibrium(z, unit3).tag is Equilibrium.NOT_EQUILIBRIUM
    assert classify_equilibrium(z, unit3, snap_tol=F(1, 10**6)).tag is Equilibrium.DESIRED
    with pytest.raises(ValueError):
        hull_at(z, unit3, snap_tol=-1)


def test_equivalence_on_six_agent_grid(six):
    # all 7^5 combinations of surface and off-surface values
    grid = surface_grid(F(1))
    mismatches = 0
    for z in itertools.product(grid, repeat=5):
        ok, _ = contains_zero(hull_at(z, six))
        mismatches += ok != is_equilibrium_analytic(z, six)
    assert mismatches == 0


@st.composite
def spec_and_surface_point(draw):
    spec = draw(positive_specs(max_n=5))
    z = [draw(st.sampled_from(surface_grid(di))) for di in spec.d]
    return spec, z


@settings(max_examples=200)
@given(spec_and_surface_point())
def test_zero_in_hull_iff_equilibrium_any_positive_gains(data):
    spec, z = data
    ok, witness = contains_zero(hull_at(z, spec))
    assert ok == is_equilibrium_analytic(z, spec)
    if ok:
        assert witness == (0,) * spec.m


@settings(max_examples=60, deadline=None)
@given(spec_and_surface_point())
def test_hull_matches_sampled_neighbourhood(data):
    spec, z = data
    if spec.m > 4:
        z = z[:4]
        spec = FormationSpec(spec.d[:4], spec.k[:4])
    ok, _ = contains_zero(hull_at(z, spec))
    assert ok == sampled_hull_contains_zero(z, spec)


@given(st.lists(fractions(F(1, 8), 20, 8), min_size=1, max_size=7))
def test_field_matrix_nonsingular_for_positive_gains(k):
    spec = FormationSpec([1] * len(k), k)
    m = np.array(spec.matrix_float)
    assert abs(np.linalg.det(m)) > 0
    sol = solve_exact(spec.matrix, [F(0)] * spec.m)
    assert sol == (0,) * spec.m


@pytest.mark.parametrize("k", [(1, 3), (2, 5, 1), (1, 1, 4, 9)])
def test_violating_gains_have_no_spurious_equilibria(k):
    # gains outside the sufficient region still keep E as the exact
    # equilibrium set, since the field matrix stays nonsingular
    spec = FormationSpec([1] * len(k), k)
    assert not validate_gains_equilibrium(spec)
    for z in itertools.product(surface_grid(F(1)), repeat=len(k)):
        ok, _ = contains_zero(hull_at(z, spec))
        assert ok == is_equilibrium_analytic(z, spec)


@settings(max_examples=100)
@given(spec_and_surface_point())
def test_vertex_images(data):
    spec, z = data
    h = hull_at(z, spec)
    verts = h.vertices()
    assert len(set(verts)) == len(verts) == 2 ** len(h.active)
    if 0 in h.active and (spec.m == 1 or 1 in h.active):
        k1, k2 = spec.k[0], spec.k[1] if spec.m > 1 else F(0)
        firsts = {v[0] for v in verts}
        if spec.m > 1:
            assert {k1 + 1 + k2, k1 + 1 - k2, -(k1 + 1) + k2, -(k1 + 1) - k2} <= firsts
        else:
            assert {k1 + 1, -(k1 + 1)} == firsts


@settings(max_examples=100)
@given(spec_and_surface_point())
def test_witness_is_valid(data):
    spec, z = data
    h = hull_at(z, spec)
    ok, witness = contains_zero(h)
    if ok:
        assert h.contains_q(witness)
        assert matvec(spec.matrix, witness) == (0,) * spec.m
