"""Scenario builders and reference computations shared by the test modules."""

from fractions import Fraction

import numpy as np

from qformation.model import FormationSpec, quantize
from qformation.solver import (
    DecisionKind,
    EventKind,
    Mode,
    resolve_boundary,
    simulate,
    time_to_boundary,
)
from qformation.timestep import exact_samples, simulate_euler

F = Fraction
STEP = F(1, 2**10)


def _interior_value(rng, d):
    """Dyadic point inside a random quantizer cell, at least d/4 from its surfaces."""
    lo, hi = [(-3 * d, -d), (-d, F(0)), (F(0), d), (d, 3 * d)][rng.integers(4)]
    frac = F(int(rng.integers(16, 49)), 64)
    return lo + frac * (hi - lo)


def crossing_scenario(seed, aligned=True):
    """A start whose exact trajectory crosses one surface transversally and
    never slides before ``t_max``.

    The crossing point is reached from the side the literal quantizer picks
    on the surface itself, so forward Euler overshoots by one step there.
    With ``aligned`` the crossing happens at a multiple of ``STEP`` and every
    quantity is dyadic, which keeps float Euler exact up to that overshoot.
    Returns ``(spec, z0, t_max, crossing_time)``.
    """
    rng = np.random.default_rng(seed)
    while True:
        m = int(rng.integers(2, 4))
        d = [F(int(rng.integers(2, 7)), 4) for _ in range(m)]
        k = [int(rng.integers(1, 5)) for _ in range(m)]
        spec = FormationSpec(d, k)
        i = int(rng.integers(m))
        z_c = [_interior_value(rng, dj) for dj in d]
        z_c[i] = [-d[i], F(0), d[i]][rng.integers(3)]
        dec = resolve_boundary(z_c, spec)
        if dec.kind is not DecisionKind.CROSS:
            continue
        out = dec.options[0]
        q_in = list(out.q)
        q_in[i] = -q_in[i]
        if q_in[i] != quantize(z_c[i], d[i]):
            continue
        v_in = [sum(row[j] * q_in[j] for j in range(m)) for row in spec.matrix]
        if v_in[i] == 0 or (v_in[i] > 0) != (out.velocity[i] > 0):
            continue
        t_cross = int(rng.integers(64, 512)) * STEP
        if not aligned:
            t_cross += F(int(rng.integers(1, 1000)), 1000) * STEP
        z0 = tuple(zc - t_cross * v for zc, v in zip(z_c, v_in))
        tau, _ = time_to_boundary(z_c, out.velocity, spec)
        after = min(tau - 8 * STEP, 512 * STEP)
        if after < 32 * STEP:
            continue
        t_max = t_cross + after
        tr = simulate(z0, spec, t_max, check_invariants=False)
        hits = [e for e in tr.events if e.kind is EventKind.BOUNDARY_HIT]
        if len(hits) != 1 or hits[0].t != t_cross:
            continue
        if any(s.mode is not Mode.REGULAR for s in tr.segments):
            continue
        return spec, z0, t_max, t_cross


def euler_deviation(spec, z0, t_max, h):
    """Max-norm distance between Euler samples and the exact trajectory."""
    tr = simulate(z0, spec, t_max, check_invariants=False)
    run = simulate_euler([float(v) for v in z0], spec, float(h), t_max)
    return float(np.max(np.abs(run.z - exact_samples(tr, run.t)))), tr


def euler_step_curvature_bound(z, spec, h):
    """Per-step upper bound on V(z_{j+1}) - V(z_j) for Euler with the literal
    quantizer under convergent gains: the first-order term is never positive,
    and the second-order term is bounded by the Hessian of V along the step."""
    d = np.array(spec.d_float)
    speed = np.abs(np.array(spec.matrix_float)).sum(axis=1)
    zmax = np.maximum(np.abs(z[:-1]), np.abs(z[1:]))
    curv = np.maximum(3 * zmax**2 - d**2, 0.0)
    return 0.5 * h**2 * (curv * speed**2).sum(axis=1)
