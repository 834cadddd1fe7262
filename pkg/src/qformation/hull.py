"""Exact Krasowskii regularization of the quantized field and equilibrium tests.

Near a point ``z`` the field equals ``M q`` where each quantizer output
``q_i`` is fixed unless ``z_i`` sits on one of its surfaces, in which case it
takes both values -1 and +1 on the two sides. The closed convex hull of the
nearby field values is therefore the image of a box under ``M``, and
``0 in K(f(z))`` becomes a small linear feasibility problem solved exactly.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .model import FormationSpec, as_vector, matvec, quantize, surface_distance


class SingularSystemError(ArithmeticError):
    pass


def solve_exact(a: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> tuple[Fraction, ...] | None:
    """Solve ``a x = b`` over the rationals.

    ``a`` may be overdetermined. Returns ``None`` if the system is
    inconsistent and raises :class:`SingularSystemError` if the columns are
    linearly dependent (the solution would not be unique).
    """
    rows = [list(map(Fraction, r)) + [Fraction(bi)] for r, bi in zip(a, b)]
    ncols = len(rows[0]) - 1 if rows else 0
    pivot_row = 0
    for col in range(ncols):
        pivot = next((r for r in range(pivot_row, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            raise SingularSystemError(f"column {col} is dependent")
        rows[pivot_row], rows[pivot] = rows[pivot], rows[pivot_row]
        p = rows[pivot_row][col]
        rows[pivot_row] = [v / p for v in rows[pivot_row]]
        for r in range(len(rows)):
            if r != pivot_row and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [v - f * w for v, w in zip(rows[r], rows[pivot_row])]
        pivot_row += 1
    if any(row[-1] != 0 for row in rows[ncols:]):
        return None
    return tuple(rows[i][-1] for i in range(ncols))


@dataclass(frozen=True)
class KrasowskiiHull:
    """``K(f(z)) = {M q : q in q_box}`` at one point.

    ``q_box[i]`` is ``(q_i, q_i)`` for a coordinate off its surfaces and
    ``(-1, 1)`` for an active one.
    """

    spec: FormationSpec
    q_box: tuple[tuple[Fraction, Fraction], ...]

    @property
    def active(self) -> tuple[int, ...]:
        return tuple(i for i, (lo, hi) in enumerate(self.q_box) if lo != hi)

    @property
    def is_singleton(self) -> bool:
        return not self.active

    def contains_q(self, q: Sequence) -> bool:
        return all(lo <= qi <= hi for qi, (lo, hi) in zip(q, self.q_box))

    def vertices(self) -> list[tuple[Fraction, ...]]:
        """Images of the box vertices, one per sign pattern of the active set."""
        out = []
        for corner in itertools.product(*(sorted({lo, hi}) for lo, hi in self.q_box)):
            out.append(matvec(self.spec.matrix, corner))
        return out


def hull_at(z: Sequence, spec: FormationSpec, snap_tol=0) -> KrasowskiiHull:
    if snap_tol < 0:
        raise ValueError("snap_tol must be non-negative")
    z = as_vector(z)
    box = []
    for zi, di in zip(z, spec.d):
        if surface_distance(zi, di) <= snap_tol:
            box.append((Fraction(-1), Fraction(1)))
        else:
            q = Fraction(quantize(zi, di))
            box.append((q, q))
    return KrasowskiiHull(spec, tuple(box))


def contains_zero(h: KrasowskiiHull) -> tuple[bool, tuple[Fraction, ...] | None]:
    """Decide ``0 in K(f(z))`` and return a certifying ``q`` when it holds.

    Solves ``M_A q_A = -M_F q_F`` exactly, where ``A`` are the active
    coordinates and ``F`` the fixed ones, then checks the box. The columns
    of ``M`` are independent for every positive gain vector, so the
    solution, when it exists, is unique.
    """
    spec = h.spec
    active = h.active
    fixed = [i for i in range(spec.m) if i not in active]
    rhs = [-sum((row[j] * h.q_box[j][0] for j in fixed), Fraction(0)) for row in spec.matrix]
    if not active:
        return (all(v == 0 for v in rhs), None)
    cols = [[row[j] for j in active] for row in spec.matrix]
    sol = solve_exact(cols, rhs)
    if sol is None:
        return False, None
    q = [lo for lo, _ in h.q_box]
    for j, v in zip(active, sol):
        q[j] = v
    if not h.contains_q(q):
        return False, None
    return True, tuple(q)


def is_equilibrium_analytic(z: Sequence, spec: FormationSpec, snap_tol=0) -> bool:
    """Membership in ``E``: every gap is either collapsed or at its target."""
    return all(surface_distance(zi, di) <= snap_tol for zi, di in zip(z, spec.d))


class Equilibrium(enum.Enum):
    NOT_EQUILIBRIUM = "not_equilibrium"
    DESIRED = "desired"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class EquilibriumClass:
    tag: Equilibrium
    witness: tuple[Fraction, ...] | None = None


def classify_equilibrium(z: Sequence, spec: FormationSpec, snap_tol=0) -> EquilibriumClass:
    z = as_vector(z)
    if not is_equilibrium_analytic(z, spec, snap_tol):
        return EquilibriumClass(Equilibrium.NOT_EQUILIBRIUM)
    _, witness = contains_zero(hull_at(z, spec, snap_tol))
    if all(abs(abs(zi) - di) <= snap_tol for zi, di in zip(z, spec.d)):
        return EquilibriumClass(Equilibrium.DESIRED, witness)
    return EquilibriumClass(Equilibrium.DEGENERATE, witness)
