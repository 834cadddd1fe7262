"""Exact event-driven integration of the regularized quantized field.

Between surface crossings the field is constant, so every trajectory is a
chain of straight segments whose endpoints are found by solving linear
equations. At a surface the admissible continuations are enumerated
exactly: every active coordinate either slides (its quantizer output is
relaxed to the value that zeroes its velocity) or leaves to one side with
that side's output, and the leaving velocity has to point away.
"""

from __future__ import annotations

import enum
import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .hull import Equilibrium, EquilibriumClass, classify_equilibrium, solve_exact
from .model import (
    FormationSpec,
    Location,
    as_vector,
    has_float,
    locate,
    lyapunov,
    matvec,
    quantize,
    validate_gains_convergence,
)


class EventOverflow(RuntimeError):
    """Raised when a run exceeds its event (or branch) budget."""


class InvariantViolation(RuntimeError):
    """A Lyapunov check failed along an exact segment."""


class ResolutionError(RuntimeError):
    """No admissible continuation exists at a surface point."""


class BranchPolicy(enum.Enum):
    DETERMINISTIC = "deterministic"
    ENUMERATE = "enumerate"


class Mode(enum.Enum):
    REGULAR = "regular"
    SLIDING = "sliding"
    REST = "rest"


class EventKind(enum.Enum):
    BOUNDARY_HIT = "boundary_hit"
    MODE_CHANGE = "mode_change"
    EQUILIBRIUM_REACHED = "equilibrium_reached"
    BRANCH_POINT = "branch_point"
    TIMEOUT = "timeout"


class Terminal(enum.Enum):
    EQUILIBRIUM_REACHED = "equilibrium_reached"
    TIMEOUT = "timeout"


class Action(enum.Enum):
    SLIDE = "slide"
    LOWER = "lower"
    UPPER = "upper"


_BOUNDARY_SIDES = {
    # (output below the surface, output above it)
    Location.AT_NEG_D: (-1, 1),
    Location.AT_ZERO: (1, -1),
    Location.AT_POS_D: (-1, 1),
}


def _side_output(loc: Location, action: Action) -> int:
    below, above = _BOUNDARY_SIDES[loc]
    return below if action is Action.LOWER else above


def _literal_side(loc: Location) -> Action:
    # the side whose output matches the raw quantizer with sgn(0) = +1
    return Action.LOWER if loc is Location.AT_NEG_D else Action.UPPER


@dataclass(frozen=True)
class Segment:
    t_start: Fraction
    t_end: Fraction
    z_start: tuple[Fraction, ...]
    velocity: tuple[Fraction, ...]
    q: tuple[Fraction, ...]
    mode: Mode
    sliding: tuple[int, ...] = ()
    rest_class: Equilibrium | None = None

    @property
    def duration(self) -> Fraction:
        return self.t_end - self.t_start

    @property
    def z_end(self) -> tuple[Fraction, ...]:
        return self.z_at(self.t_end)

    def z_at(self, t) -> tuple[Fraction, ...]:
        dt = t - self.t_start
        return tuple(z + dt * v for z, v in zip(self.z_start, self.velocity))


@dataclass(frozen=True)
class Event:
    t: Fraction
    kind: EventKind
    coords: tuple[int, ...] = ()
    detail: str = ""
    branch: str = "0"


@dataclass
class Trajectory:
    spec: FormationSpec
    z0: tuple[Fraction, ...]
    segments: list[Segment] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)
    terminal: Terminal | None = None
    terminal_class: EquilibriumClass | None = None
    branch: str = "0"

    @property
    def z_end(self) -> tuple[Fraction, ...]:
        return self.segments[-1].z_end if self.segments else self.z0

    @property
    def t_end(self) -> Fraction:
        return self.segments[-1].t_end if self.segments else Fraction(0)

    @property
    def rest_time(self) -> Fraction | None:
        """Time at which the trajectory came to rest, if it did."""
        if self.segments and self.segments[-1].mode is Mode.REST:
            return self.segments[-1].t_start
        return None

    @property
    def sliding_duration(self) -> Fraction:
        return sum((s.duration for s in self.segments if s.mode is Mode.SLIDING), Fraction(0))

    @property
    def event_count(self) -> int:
        return len(self.events)

    def replay(self) -> tuple[Fraction, ...]:
        """Terminal state from ``z0`` and the per-segment velocities alone."""
        z = list(self.z0)
        for s in self.segments:
            z = [zi + s.duration * vi for zi, vi in zip(z, s.velocity)]
        return tuple(z)

    def state_at(self, t) -> tuple[Fraction, ...]:
        for s in self.segments:
            if s.t_start <= t <= s.t_end:
                return s.z_at(t)
        raise ValueError(f"t={t} outside [0, {self.t_end}]")


@dataclass(frozen=True)
class Continuation:
    """One admissible way to leave (or stay on) the current surfaces."""

    actions: tuple[tuple[int, Action], ...]
    q: tuple[Fraction, ...]
    velocity: tuple[Fraction, ...]

    @property
    def sliding(self) -> tuple[int, ...]:
        return tuple(i for i, a in self.actions if a is Action.SLIDE)

    @property
    def is_rest(self) -> bool:
        return all(v == 0 for v in self.velocity)

    def describe(self) -> str:
        if self.is_rest:
            return "rest"
        return ",".join(f"z{i + 1}:{a.value}" for i, a in self.actions)


class DecisionKind(enum.Enum):
    CROSS = "cross"
    SLIDE = "slide"
    REST = "rest"
    BRANCH = "branch"


@dataclass(frozen=True)
class Decision:
    kind: DecisionKind
    options: tuple[Continuation, ...]


def time_to_boundary(z: Sequence, velocity: Sequence, spec: FormationSpec):
    """First time a moving coordinate reaches one of its surfaces ahead.

    Returns ``(t, coords)``; ``t`` is ``math.inf`` (with no coords) when no
    coordinate is headed towards a surface. Surfaces a coordinate currently
    sits on do not count.
    """
    best = math.inf
    coords: list[int] = []
    for i, (zi, vi, di) in enumerate(zip(z, velocity, spec.d)):
        if vi == 0:
            continue
        ahead = [(b - zi) / vi for b in (-di, 0, di)]
        ahead = [t for t in ahead if t > 0]
        if not ahead:
            continue
        t = min(ahead)
        if t < best:
            best, coords = t, [i]
        elif t == best:
            coords.append(i)
    return best, tuple(coords)


def _active_set(z, spec) -> tuple[int, ...]:
    return tuple(i for i, (zi, di) in enumerate(zip(z, spec.d)) if locate(zi, di).on_boundary)


def _build(z, spec, active, locs, actions) -> Continuation | None:
    m = spec.m
    mat = spec.matrix
    q: list[Fraction] = [Fraction(quantize(zi, di)) for zi, di in zip(z, spec.d)]
    sliding = []
    for i, a in zip(active, actions):
        if a is Action.SLIDE:
            sliding.append(i)
        else:
            q[i] = Fraction(_side_output(locs[i], a))
    if sliding:
        others = [j for j in range(m) if j not in sliding]
        lhs = [[mat[i][j] for j in sliding] for i in sliding]
        rhs = [-sum((mat[i][j] * q[j] for j in others), Fraction(0)) for i in sliding]
        sol = solve_exact(lhs, rhs)
        if sol is None or any(abs(v) > 1 for v in sol):
            return None
        for i, v in zip(sliding, sol):
            q[i] = v
    vel = matvec(mat, q)
    for i, a in zip(active, actions):
        if a is Action.LOWER and not vel[i] < 0:
            return None
        if a is Action.UPPER and not vel[i] > 0:
            return None
    return Continuation(tuple(zip(active, actions)), tuple(q), vel)


def _preferred_actions(z, spec, active, locs) -> list[Action]:
    """Slide where attracting, cross where transversal, literal side where repulsive.

    The normal velocity of coordinate ``i`` is bounded with interval
    arithmetic over the neighbours' admissible outputs.
    """
    mat = spec.matrix
    prefs = []
    for i in active:
        lo = hi = Fraction(0)
        for j in (i - 1, i + 1):
            if 0 <= j < spec.m and mat[i][j] != 0:
                if j in active:
                    lo -= abs(mat[i][j])
                    hi += abs(mat[i][j])
                else:
                    c = mat[i][j] * quantize(z[j], spec.d[j])
                    lo += c
                    hi += c
        below, above = _BOUNDARY_SIDES[locs[i]]
        low_side = (mat[i][i] * below + lo, mat[i][i] * below + hi)
        high_side = (mat[i][i] * above + lo, mat[i][i] * above + hi)
        if low_side[0] > 0 and high_side[1] < 0:
            prefs.append(Action.SLIDE)
        elif low_side[1] < 0 and high_side[0] > 0:
            prefs.append(_literal_side(locs[i]))
        elif low_side[0] > 0 and high_side[0] > 0:
            prefs.append(Action.UPPER)
        elif low_side[1] < 0 and high_side[1] < 0:
            prefs.append(Action.LOWER)
        else:
            prefs.append(Action.SLIDE)
    return prefs


def _kind(c: Continuation) -> DecisionKind:
    if c.is_rest:
        return DecisionKind.REST
    return DecisionKind.SLIDE if c.sliding else DecisionKind.CROSS


def admissible_continuations(z: Sequence, spec: FormationSpec, active=None) -> list[Continuation]:
    """All continuations from a surface point, most preferred first."""
    z = as_vector(z)
    if active is None:
        active = _active_set(z, spec)
    active = tuple(active)
    locs = _check_active(z, spec, active)
    prefs = _preferred_actions(z, spec, active, locs)
    choices = [[p] + [a for a in Action if a is not p] for p in prefs]
    found = []
    for actions in itertools.product(*choices):
        c = _build(z, spec, active, locs, actions)
        if c is not None:
            misses = sum(a is not p for a, p in zip(actions, prefs))
            found.append((misses, len(found), c))
    found.sort(key=lambda item: item[:2])
    return [c for _, _, c in found]


def resolve_boundary(
    z: Sequence,
    spec: FormationSpec,
    policy: BranchPolicy = BranchPolicy.DETERMINISTIC,
    active=None,
) -> Decision:
    """Decide how a solution continues from a point on discontinuity surfaces.

    ``active`` defaults to every coordinate on a surface and must match it
    exactly when given.
    """
    z = as_vector(z)
    if active is None:
        active = _active_set(z, spec)
    active = tuple(sorted(active))
    if not active:
        raise ValueError("z is not on any discontinuity surface")
    locs = _check_active(z, spec, active)
    if policy is BranchPolicy.DETERMINISTIC:
        prefs = _preferred_actions(z, spec, active, locs)
        c = _build(z, spec, active, locs, prefs)
        if c is not None:
            return Decision(_kind(c), (c,))
    options = admissible_continuations(z, spec, active)
    if not options:
        raise ResolutionError(f"no admissible continuation at z={z}")
    if policy is BranchPolicy.DETERMINISTIC or len(options) == 1:
        return Decision(_kind(options[0]), (options[0],))
    return Decision(DecisionKind.BRANCH, tuple(options))


def sliding_velocity(z: Sequence, active: Sequence[int], spec: FormationSpec):
    """Velocity and relaxed quantizer outputs while sliding on ``active``.

    Coordinates off the sliding set keep their interior outputs. The sliding
    outputs solve a nonsingular principal subsystem of the field matrix, so
    they are unique.
    """
    z = as_vector(z)
    active = tuple(sorted(active))
    locs = _check_active(z, spec, active)
    c = _build(z, spec, active, locs, [Action.SLIDE] * len(active))
    if c is None:
        raise ResolutionError(f"{active} is not a feasible sliding set at z={z}")
    return c.velocity, c.q


def _check_active(z, spec, active) -> dict[int, Location]:
    locs = {}
    on = set(_active_set(z, spec))
    for i in active:
        loc = locate(z[i], spec.d[i])
        if not loc.on_boundary:
            raise ValueError(f"z{i + 1}={z[i]} is not on a surface")
        locs[i] = loc
    if on != set(active):
        raise ValueError(f"active set {active} does not match surfaces {sorted(on)}")
    return locs


def _check_segment(seg: Segment, spec: FormationSpec) -> None:
    d = spec.d
    z0 = seg.z_start
    v0 = lyapunov(z0, spec)
    vm = lyapunov(seg.z_at(seg.t_start + seg.duration / 2), spec)
    v1 = lyapunov(seg.z_end, spec)
    if not (vm <= v0 and v1 <= vm):
        raise InvariantViolation(
            f"V increased on [{seg.t_start}, {seg.t_end}]: {v0} -> {vm} -> {v1}"
        )
    grad = [zi * (zi * zi - di * di) for zi, di in zip(z0, d)]
    rate = sum((g * v for g, v in zip(grad, seg.velocity)), Fraction(0))
    bound = sum((abs(zi) * abs(zi * zi - di * di) for zi, di in zip(z0, d)), Fraction(0))
    if rate > -bound:
        raise InvariantViolation(f"dV/dt={rate} exceeds -{bound} at t={seg.t_start}")


@dataclass
class _Run:
    z: tuple[Fraction, ...]
    t: Fraction
    traj: Trajectory
    forced: Continuation | None = None


def _snap(z, spec, tol):
    if tol <= 0:
        return z
    out = []
    for zi, di in zip(z, spec.d):
        for b in (-di, Fraction(0), di):
            if abs(zi - b) <= tol:
                zi = b
                break
        out.append(zi)
    return tuple(out)


def simulate(
    z0: Sequence,
    spec: FormationSpec,
    t_max,
    policy: BranchPolicy = BranchPolicy.DETERMINISTIC,
    snap_tol=None,
    max_events: int = 10_000,
    max_branches: int = 1_000,
    check_invariants: bool | None = None,
):
    """Integrate the regularized field exactly from ``z0`` up to ``t_max``.

    Returns one :class:`Trajectory` under the deterministic policy and a list
    of them (one per branch) under :attr:`BranchPolicy.ENUMERATE`.

    ``snap_tol`` only matters for float input: coordinates of ``z0`` that
    close to a surface are moved onto it. Its default is
    ``1e-12 * max(d)`` for float ``z0`` and 0 otherwise. Lyapunov checks run
    by default whenever the gains satisfy the convergence conditions.
    """
    policy = BranchPolicy(policy)
    if snap_tol is None:
        snap_tol = Fraction(1e-12) * max(spec.d) if has_float(z0) else 0
    z = _snap(as_vector(z0), spec, Fraction(snap_tol))
    if len(z) != spec.m:
        raise ValueError(f"z0 has length {len(z)}, expected {spec.m}")
    t_max = Fraction(t_max)
    good_gains = validate_gains_convergence(spec)
    if check_invariants is None:
        check_invariants = good_gains
        if not good_gains:
            warnings.warn(
                "gains do not satisfy the convergence conditions; "
                "Lyapunov checks are disabled",
                stacklevel=2,
            )

    pending = [_Run(z, Fraction(0), Trajectory(spec, z))]
    finished: list[Trajectory] = []
    while pending:
        run = pending.pop()
        forks = _integrate(run, spec, t_max, policy, max_events, check_invariants)
        if forks is None:
            finished.append(run.traj)
            continue
        for j, option in reversed(list(enumerate(forks))):
            tr = run.traj
            child = Trajectory(
                spec, tr.z0, list(tr.segments), list(tr.events), branch=f"{tr.branch}.{j}"
            )
            pending.append(_Run(run.z, run.t, child, forced=option))
        if len(pending) + len(finished) > max_branches:
            raise EventOverflow(f"more than {max_branches} branches")
    if policy is BranchPolicy.DETERMINISTIC:
        return finished[0]
    return finished


def _integrate(run: _Run, spec, t_max, policy, max_events, check) -> list[Continuation] | None:
    traj = run.traj

    def emit(kind, coords=(), detail=""):
        traj.events.append(Event(run.t, kind, tuple(coords), detail, traj.branch))
        if len(traj.events) > max_events:
            raise EventOverflow(f"more than {max_events} events (branch {traj.branch})")

    while True:
        if run.forced is not None:
            cont, run.forced = run.forced, None
        elif _active_set(run.z, spec):
            decision = resolve_boundary(run.z, spec, policy)
            if decision.kind is DecisionKind.BRANCH:
                emit(
                    EventKind.BRANCH_POINT,
                    _active_set(run.z, spec),
                    "|".join(c.describe() for c in decision.options),
                )
                return list(decision.options)
            cont = decision.options[0]
        else:
            q = tuple(Fraction(quantize(zi, di)) for zi, di in zip(run.z, spec.d))
            cont = Continuation((), q, matvec(spec.matrix, q))

        if cont.is_rest:
            cls = classify_equilibrium(run.z, spec)
            seg = Segment(run.t, max(run.t, t_max), run.z, cont.velocity, cont.q, Mode.REST,
                          tuple(range(spec.m)), cls.tag)
            _push(traj, seg, emit)
            emit(EventKind.EQUILIBRIUM_REACHED, (), cls.tag.value)
            traj.terminal = Terminal.EQUILIBRIUM_REACHED
            traj.terminal_class = cls
            return None

        if run.t >= t_max:
            emit(EventKind.TIMEOUT)
            traj.terminal = Terminal.TIMEOUT
            traj.terminal_class = classify_equilibrium(run.z, spec)
            return None

        tau, coords = time_to_boundary(run.z, cont.velocity, spec)
        hit = tau != math.inf and run.t + tau <= t_max
        t_end = run.t + tau if hit else t_max
        mode = Mode.SLIDING if cont.sliding else Mode.REGULAR
        seg = Segment(run.t, t_end, run.z, cont.velocity, cont.q, mode, cont.sliding)
        if check:
            _check_segment(seg, spec)
        _push(traj, seg, emit)
        run.z, run.t = seg.z_end, t_end
        if hit:
            emit(EventKind.BOUNDARY_HIT, coords)


def _push(traj: Trajectory, seg: Segment, emit) -> None:
    prev = traj.segments[-1] if traj.segments else None
    traj.segments.append(seg)
    if prev is not None and (prev.mode, prev.sliding) != (seg.mode, seg.sliding):
        emit(EventKind.MODE_CHANGE, seg.sliding, f"{prev.mode.value}->{seg.mode.value}")
