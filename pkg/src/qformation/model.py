"""Formation model: problem instances, the sign quantizer and both vector fields.

All arithmetic on the exact path is done with :class:`fractions.Fraction`.
Floats are accepted everywhere and converted exactly (a binary float is a
rational number), so the only source of inexactness is the caller's input.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from numbers import Rational
from typing import Sequence, Union

import numpy as np

Number = Union[int, float, Fraction, str]


def as_fraction(value: Number) -> Fraction:
    """Convert ``value`` to an exact :class:`Fraction`.

    Strings are parsed as decimals or ``p/q`` ratios, so ``"0.1"`` becomes
    exactly 1/10 (while the float ``0.1`` becomes its binary value).
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        if not np.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(float(value))
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a number")


def as_vector(values: Sequence[Number]) -> tuple[Fraction, ...]:
    return tuple(as_fraction(v) for v in values)


def has_float(values) -> bool:
    return any(isinstance(v, (float, np.floating)) for v in values)


@dataclass(frozen=True)
class FormationSpec:
    """A one-dimensional rigid formation of ``n`` agents.

    ``d[i]`` is the desired gap between agents ``i`` and ``i+1`` and ``k[i]``
    the gain on that constraint (both 0-based here, n-1 entries each).
    """

    d: tuple[Fraction, ...]
    k: tuple[Fraction, ...]

    def __init__(self, d: Sequence[Number], k: Sequence[Number]):
        d = as_vector(d)
        k = as_vector(k)
        if len(d) == 0:
            raise ValueError("a formation needs at least 2 agents")
        if len(d) != len(k):
            raise ValueError(f"got {len(d)} gaps but {len(k)} gains")
        if any(v <= 0 for v in d):
            raise ValueError(f"desired gaps must be positive, got {d}")
        if any(v <= 0 for v in k):
            raise ValueError(f"gains must be positive, got {k}")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "k", k)

    @classmethod
    def create(cls, n: int, d: Number | Sequence[Number], k: Sequence[Number]) -> "FormationSpec":
        """Build a spec for ``n`` agents; a scalar ``d`` is broadcast."""
        if n < 2:
            raise ValueError(f"n must be at least 2, got {n}")
        if isinstance(d, (str, int, float, Fraction, np.number)):
            d = [d] * (n - 1)
        spec = cls(d, k)
        if spec.n != n:
            raise ValueError(f"n={n} but d and k have {spec.m} entries (expected {n - 1})")
        return spec

    @property
    def n(self) -> int:
        return len(self.d) + 1

    @property
    def m(self) -> int:
        """Number of relative coordinates (``n - 1``)."""
        return len(self.d)

    @cached_property
    def matrix(self) -> tuple[tuple[Fraction, ...], ...]:
        """The tridiagonal map from quantizer outputs to z-velocities."""
        return tridiagonal_field(self.k)

    @cached_property
    def matrix_float(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.matrix])

    @cached_property
    def d_float(self) -> np.ndarray:
        return np.array([float(v) for v in self.d])


def tridiagonal_field(k: Sequence[Fraction]) -> tuple[tuple[Fraction, ...], ...]:
    m = len(k)
    rows = []
    for i in range(m):
        row = [Fraction(0)] * m
        row[i] = -(k[i] + 1)
        if i > 0:
            row[i - 1] = Fraction(1)
        if i + 1 < m:
            row[i + 1] = k[i + 1]
        rows.append(tuple(row))
    return tuple(rows)


def matvec(matrix, q) -> tuple:
    return tuple(sum((a * b for a, b in zip(row, q)), Fraction(0)) for row in matrix)


# -- quantizer ---------------------------------------------------------------


def sgn(v) -> int:
    """Two-level sign with ``sgn(0) = +1``."""
    return 1 if v >= 0 else -1


def quantize(z_i, d_i) -> int:
    """The one-bit guidance signal ``sgn(z) * sgn(|z| - d)`` for one gap."""
    return sgn(z_i) * sgn(abs(z_i) - d_i)


class Location(enum.Enum):
    """Where a relative coordinate sits relative to the surfaces -d, 0, d."""

    BELOW_NEG_D = "(-inf,-d)"
    AT_NEG_D = "{-d}"
    NEG_INNER = "(-d,0)"
    AT_ZERO = "{0}"
    POS_INNER = "(0,d)"
    AT_POS_D = "{d}"
    ABOVE_POS_D = "(d,inf)"

    @property
    def on_boundary(self) -> bool:
        return self in (Location.AT_NEG_D, Location.AT_ZERO, Location.AT_POS_D)

    @property
    def output(self) -> int | None:
        """Fixed quantizer output on an open interval, ``None`` on a surface."""
        return _INTERVAL_OUTPUT.get(self)


_INTERVAL_OUTPUT = {
    Location.BELOW_NEG_D: -1,
    Location.NEG_INNER: 1,
    Location.POS_INNER: -1,
    Location.ABOVE_POS_D: 1,
}


def surface_distance(z_i, d_i):
    """Distance from ``z_i`` to the nearest of the surfaces -d, 0, d."""
    return min(abs(z_i), abs(abs(z_i) - d_i))


def locate(z_i, d_i, snap_tol=0) -> Location:
    if abs(z_i) <= snap_tol:
        return Location.AT_ZERO
    if abs(z_i - d_i) <= snap_tol:
        return Location.AT_POS_D
    if abs(z_i + d_i) <= snap_tol:
        return Location.AT_NEG_D
    if z_i > d_i:
        return Location.ABOVE_POS_D
    if z_i > 0:
        return Location.POS_INNER
    if z_i > -d_i:
        return Location.NEG_INNER
    return Location.BELOW_NEG_D


def quantizer_cell(z: Sequence, spec: FormationSpec, snap_tol=0) -> tuple[Location, ...]:
    _check_len(z, spec.m, "z")
    return tuple(locate(zi, di, snap_tol) for zi, di in zip(z, spec.d))


def quantizer_outputs(z: Sequence, spec: FormationSpec) -> tuple[int, ...]:
    return tuple(quantize(zi, di) for zi, di in zip(z, spec.d))


# -- vector fields -----------------------------------------------------------


def vector_field_x(x: Sequence, spec: FormationSpec) -> tuple:
    """Agent velocities under the quantized guidance law."""
    _check_len(x, spec.n, "x")
    q = [quantize(x[i] - x[i + 1], spec.d[i]) for i in range(spec.m)]
    v = []
    for i in range(spec.n):
        vi = Fraction(0)
        if i > 0:
            vi += q[i - 1]
        if i < spec.m:
            vi -= spec.k[i] * q[i]
        v.append(vi)
    return tuple(v)


def vector_field_z(z: Sequence, spec: FormationSpec) -> tuple:
    _check_len(z, spec.m, "z")
    return matvec(spec.matrix, quantizer_outputs(z, spec))


def x_to_z(x: Sequence) -> tuple:
    if len(x) < 2:
        raise ValueError("need at least two agent positions")
    return tuple(x[i] - x[i + 1] for i in range(len(x) - 1))


def z_to_x(z: Sequence, anchor) -> tuple:
    """Positions with agent ``n`` at ``anchor``; inverse of :func:`x_to_z`."""
    x = [anchor]
    for zi in reversed(z):
        x.append(x[-1] + zi)
    return tuple(reversed(x))


def speed_bound(spec: FormationSpec) -> tuple[Fraction, ...]:
    """Per-component bound on ``|z_i'|`` over all of state space."""
    return tuple(sum((abs(a) for a in row), Fraction(0)) for row in spec.matrix)


def lyapunov(z: Sequence, spec: FormationSpec):
    """``V(z) = 1/4 * sum (z_i^2 - d_i^2)^2``; exact for rational input."""
    return sum(((zi * zi - di * di) ** 2 for zi, di in zip(z, spec.d)), Fraction(0)) / 4


# -- gain conditions ---------------------------------------------------------


def validate_gains_equilibrium(spec: FormationSpec) -> bool:
    """Gain ordering under which the equilibria are exactly the set E."""
    k, m = spec.k, spec.m
    if m >= 2 and not k[0] + 1 > k[1]:
        return False
    if any(not k[i] > k[i + 1] for i in range(1, m - 1)):
        return False
    return k[-1] > 0


def validate_gains_convergence(spec: FormationSpec) -> bool:
    """Gain ordering under which every solution converges to E.

    For a single gap (n=2) only ``k >= 1`` applies.
    """
    k, m = spec.k, spec.m
    if m >= 2 and not k[0] >= k[1]:
        return False
    if any(not k[i] >= k[i + 1] + 1 for i in range(1, m - 1)):
        return False
    return k[-1] >= 1


# -- bandwidth ---------------------------------------------------------------


@dataclass(frozen=True)
class BitBudget:
    per_agent: tuple[int, ...]
    total: int
    stated_total: int

    @property
    def discrepancy(self) -> int:
        return self.stated_total - self.total

    def describe(self) -> str:
        n = len(self.per_agent)
        if n == 2:
            head = "agents 1 and 2: 2 bits"
        elif n == 3:
            head = "agent 2: 4 bits, agents 1 and 3: 2 bits"
        else:
            head = f"agents 2–{n - 1}: 4 bits, agents 1 and {n}: 2 bits"
        lines = [head, f"total (per-agent sum): {self.total} bits"]
        lines.append(f"total as 4n-2: {self.stated_total} bits")
        if self.discrepancy:
            lines.append(
                f"note: 4n-2 exceeds the per-agent sum by {self.discrepancy} bits"
            )
        return "\n".join(lines)


def bit_budget(spec_or_n: FormationSpec | int) -> BitBudget:
    """Guidance bandwidth: two one-bit signs per constraint an agent touches."""
    n = spec_or_n.n if isinstance(spec_or_n, FormationSpec) else int(spec_or_n)
    if n < 2:
        raise ValueError("n must be at least 2")
    per_agent = tuple(2 if i in (0, n - 1) else 4 for i in range(n))
    return BitBudget(per_agent, sum(per_agent), 4 * n - 2)


def _check_len(v: Sequence, expected: int, name: str) -> None:
    if len(v) != expected:
        raise ValueError(f"{name} has length {len(v)}, expected {expected}")
