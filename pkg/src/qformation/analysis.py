"""Lyapunov bookkeeping, the three-agent basin classifier, run summaries."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .hull import Equilibrium
from .model import FormationSpec, as_vector, locate, lyapunov, speed_bound
from .solver import Mode, Terminal, Trajectory
from .timestep import SampledTrajectory


def lyapunov_rate(z: Sequence, velocity: Sequence, spec: FormationSpec):
    """Directional derivative of V at ``z`` along ``velocity``."""
    return sum((zi * (zi * zi - di * di) * vi for zi, di, vi in zip(z, spec.d, velocity)), Fraction(0))


def decay_bound(z: Sequence, spec: FormationSpec):
    """Guaranteed decrease rate ``sum |z_i| |z_i^2 - d_i^2|`` off the surfaces.

    Under the convergence gain conditions ``dV/dt <= -decay_bound(z)``.
    """
    for i, (zi, di) in enumerate(zip(z, spec.d)):
        if locate(zi, di).on_boundary:
            raise ValueError(f"z{i + 1}={zi} lies on a discontinuity surface")
    return sum((abs(zi) * abs(zi * zi - di * di) for zi, di in zip(z, spec.d)), Fraction(0))


# -- three-agent basins ------------------------------------------------------


@dataclass(frozen=True)
class BasinPrediction:
    start: tuple[Fraction, Fraction]
    limits: frozenset[tuple[Fraction, Fraction]]
    deterministic: bool
    finite_time_bound: Fraction | None = None


def _sign(v) -> int:
    return (v > 0) - (v < 0)


def _first_quadrant_time(a, b, d1, d2) -> Fraction:
    """Exact arrival time at ``(d1, d2)`` from ``a, b > 0`` with unit gains.

    Each case is a straight flight to the first surface followed by a slide
    at speed 3/2 (or a direct hit on the corner).
    """
    two_thirds = Fraction(2, 3)
    if a >= d1 and b >= d2:
        # velocity (-1, -1), slides along z1 = d1 or z2 = d2
        gap = (b - d2) - (a - d1)
        return min(a - d1, b - d2) + abs(gap) * two_thirds
    if a < d1 and b < d2:
        # velocity (1, 1)
        gap = (d1 - a) - (d2 - b)
        return min(d1 - a, d2 - b) + abs(gap) * two_thirds
    # velocity (3, -3) above-left of the corner, (-3, 3) below-right
    s = a + b - d1 - d2
    reach = min(d1 - a, b - d2) if a < d1 else min(a - d1, d2 - b)
    return reach / 3 + abs(s) * two_thirds


def classify_basin_3agent(z0: Sequence, d: Sequence) -> BasinPrediction:
    """Predicted limit points for three agents with gains ``k = (1, 1)``.

    Off the axes the limit is the target corner of the start's quadrant.
    Starts on exactly one axis may end at either target corner next to it
    or at the collapsed point between them; the origin may end anywhere in
    ``E_2``. Arrival times are exact in the first and third quadrants,
    which map onto each other under ``z -> -z``.
    """
    z1, z2 = as_vector(z0)
    d1, d2 = as_vector(d)
    if d1 <= 0 or d2 <= 0:
        raise ValueError("desired gaps must be positive")
    start = (z1, z2)
    s1, s2 = _sign(z1), _sign(z2)
    if s1 and s2:
        bound = None
        if s1 == s2:
            bound = _first_quadrant_time(abs(z1), abs(z2), d1, d2)
        return BasinPrediction(start, frozenset({(s1 * d1, s2 * d2)}), True, bound)
    zero = Fraction(0)
    if s1 == 0 and s2 == 0:
        limits = {(a, b) for a in (-d1, zero, d1) for b in (-d2, zero, d2)}
    elif s1 == 0:
        limits = {(a, s2 * d2) for a in (-d1, zero, d1)}
    else:
        limits = {(s1 * d1, b) for b in (-d2, zero, d2)}
    return BasinPrediction(start, frozenset(limits), False)


# -- summaries ---------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceReport:
    terminal: Terminal
    terminal_class: Equilibrium | None
    terminal_state: tuple[Fraction, ...]
    rest_time: Fraction | None
    time_to_e1: Fraction | None
    time_to_e2: Fraction | None
    sliding_duration: Fraction
    event_count: int
    v_profile: tuple[tuple[Fraction, Fraction], ...]


def _preimage(z0, v, ts, te, lo, hi):
    """Times in ``[ts, te]`` where ``z0 + (t - ts) v`` lies in ``[lo, hi]``."""
    if v == 0:
        return (ts, te) if lo <= z0 <= hi else None
    a = ts + (lo - z0) / v
    b = ts + (hi - z0) / v
    a, b = min(a, b), max(a, b)
    a, b = max(a, ts), min(b, te)
    return (a, b) if a <= b else None


def _intersect(xs, ys):
    out = []
    for a, b in xs:
        for c, e in ys:
            lo, hi = max(a, c), min(b, e)
            if lo <= hi:
                out.append((lo, hi))
    return out


def _entry_time(traj: Trajectory, tol, include_zero: bool):
    for seg in traj.segments:
        feasible = [(seg.t_start, seg.t_end)]
        for zi, vi, di in zip(seg.z_start, seg.velocity, traj.spec.d):
            boxes = [(di - tol, di + tol), (-di - tol, -di + tol)]
            if include_zero:
                boxes.append((-tol, tol))
            hits = [p for lo, hi in boxes if (p := _preimage(zi, vi, seg.t_start, seg.t_end, lo, hi))]
            feasible = _intersect(feasible, hits)
            if not feasible:
                break
        if feasible:
            return min(a for a, _ in feasible)
    return None


def convergence_report(traj: Trajectory, tol=0) -> ConvergenceReport:
    """Summarize an exact trajectory; every number is computed from segments."""
    tol = Fraction(tol)
    spec = traj.spec
    profile = [(s.t_start, lyapunov(s.z_start, spec)) for s in traj.segments]
    if traj.segments:
        last = traj.segments[-1]
        profile.append((last.t_end, lyapunov(last.z_end, spec)))
    cls = traj.terminal_class.tag if traj.terminal_class is not None else None
    return ConvergenceReport(
        terminal=traj.terminal,
        terminal_class=cls,
        terminal_state=traj.z_end,
        rest_time=traj.rest_time,
        time_to_e1=_entry_time(traj, tol, include_zero=False),
        time_to_e2=_entry_time(traj, tol, include_zero=True),
        sliding_duration=traj.sliding_duration,
        event_count=traj.event_count,
        v_profile=tuple(profile),
    )


@dataclass(frozen=True)
class SampledReport:
    terminal_class: Equilibrium | None
    terminal_state: tuple[float, ...]
    terminal_mean: tuple[float, ...]
    tol: float
    time_to_e1: float | None
    time_to_e2: float | None
    chatter_band: tuple[float, ...]
    max_v_increase: float


def _first_time(t, mask):
    idx = np.flatnonzero(mask)
    return float(t[idx[0]]) if idx.size else None


def sampled_report(run: SampledTrajectory, spec: FormationSpec, tol: float | None = None) -> SampledReport:
    """Summarize a time-stepped run.

    ``tol`` defaults to one step at the largest component speed, the size of
    the chattering a stepped solver cannot avoid. Neighbourhood entry is
    counted from the first sample after which the run never leaves it. The
    chattering band is measured from the moment the run settles near
    ``E_2``; ``terminal_mean`` averages the last 10% of samples.
    """
    d = spec.d_float
    if tol is None:
        tol = run.h * float(max(speed_bound(spec)))
    gap_e1 = np.abs(np.abs(run.z) - d).max(axis=1)
    gap_e2 = np.minimum(np.abs(run.z), np.abs(np.abs(run.z) - d)).max(axis=1)

    def settled(gap):
        inside = gap <= tol
        # suffix-all: sample j counts only if every later sample is inside too
        tail = np.flip(np.logical_and.accumulate(np.flip(inside)))
        return _first_time(run.t, tail)

    t1, t2 = settled(gap_e1), settled(gap_e2)
    if t1 is not None:
        cls = Equilibrium.DESIRED
    elif t2 is not None:
        cls = Equilibrium.DEGENERATE
    else:
        cls = None
    t_from = t2 if t2 is not None else run.t[-1]
    band = tuple(run.band(i, t_from) for i in range(spec.m))
    tail = run.z[-max(1, len(run.t) // 10):]
    dv = np.diff(run.V)
    return SampledReport(
        terminal_class=cls,
        terminal_state=tuple(float(v) for v in run.z_end),
        terminal_mean=tuple(float(v) for v in tail.mean(axis=0)),
        tol=float(tol),
        time_to_e1=t1,
        time_to_e2=t2,
        chatter_band=band,
        max_v_increase=float(dv.max()) if dv.size else 0.0,
    )


def sliding_fraction(traj: Trajectory) -> Fraction:
    """Share of the simulated horizon spent sliding (rest excluded)."""
    moving = sum((s.duration for s in traj.segments if s.mode is not Mode.REST), Fraction(0))
    return traj.sliding_duration / moving if moving else Fraction(0)
