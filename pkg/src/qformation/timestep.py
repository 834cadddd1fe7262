"""Fixed-step integrators on the raw discontinuous field.

These are deliberately naive: forward Euler on the literal quantizer (which
chatters around sliding surfaces) and a hysteretic variant that holds each
quantizer output until the coordinate is clearly past a surface. They serve
as independent oracles for the exact solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .model import FormationSpec, as_fraction


@dataclass(frozen=True)
class SampledTrajectory:
    h: float
    t: np.ndarray
    z: np.ndarray
    V: np.ndarray
    q: np.ndarray

    @property
    def z_end(self) -> np.ndarray:
        return self.z[-1]

    def band(self, coord: int, t_from: float = 0.0) -> float:
        """Peak-to-peak spread of one coordinate over samples with ``t >= t_from``."""
        sel = self.z[self.t >= t_from, coord]
        if sel.size == 0:
            return 0.0
        return float(sel.max() - sel.min())


def quantize_array(z: np.ndarray, d: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, 1.0, -1.0) * np.where(np.abs(z) - d >= 0, 1.0, -1.0)


def lyapunov_array(z: np.ndarray, d: np.ndarray) -> np.ndarray:
    return 0.25 * np.sum((z**2 - d**2) ** 2, axis=-1)


def _decimal(v) -> Fraction:
    # a float like 1e-3 sits just above 1/1000; read it as the decimal the
    # user typed so that t_max / h counts whole steps
    return Fraction(repr(v)) if isinstance(v, float) else as_fraction(v)


def _steps(h, t_max) -> int:
    if h <= 0:
        raise ValueError("step size must be positive")
    return math.floor(_decimal(t_max) / _decimal(h))


def simulate_euler(z0: Sequence, spec: FormationSpec, h: float, t_max) -> SampledTrajectory:
    """Forward Euler ``z <- z + h M q(z)`` with the literal ``sgn(0) = +1``."""
    steps = _steps(h, t_max)
    d = spec.d_float
    mat = spec.matrix_float
    z = np.empty((steps + 1, spec.m))
    q = np.empty((steps + 1, spec.m))
    z[0] = [float(v) for v in z0]
    for j in range(steps):
        q[j] = quantize_array(z[j], d)
        z[j + 1] = z[j] + h * (mat @ q[j])
    q[steps] = quantize_array(z[steps], d)
    t = np.arange(steps + 1) * float(h)
    return SampledTrajectory(float(h), t, z, lyapunov_array(z, d), q)


def simulate_hysteresis(
    z0: Sequence, spec: FormationSpec, h: float, eps_h: float, t_max
) -> SampledTrajectory:
    """Euler with a hysteretic quantizer.

    Each output starts at the raw quantizer value and is replaced by the raw
    value only once the coordinate is at least ``eps_h`` away from every one
    of its surfaces, so it flips at most once per excursion through a band.
    """
    if eps_h <= 0:
        raise ValueError("hysteresis band must be positive")
    steps = _steps(h, t_max)
    d = spec.d_float
    mat = spec.matrix_float
    z = np.empty((steps + 1, spec.m))
    q = np.empty((steps + 1, spec.m))
    z[0] = [float(v) for v in z0]
    held = quantize_array(z[0], d)
    for j in range(steps + 1):
        raw = quantize_array(z[j], d)
        clear = np.minimum(np.abs(z[j]), np.abs(np.abs(z[j]) - d)) >= eps_h
        held = np.where((raw != held) & clear, raw, held)
        q[j] = held
        if j < steps:
            z[j + 1] = z[j] + h * (mat @ held)
    t = np.arange(steps + 1) * float(h)
    return SampledTrajectory(float(h), t, z, lyapunov_array(z, d), q)


def exact_samples(traj, t: np.ndarray) -> np.ndarray:
    """Evaluate an exact trajectory at the given sample times (as floats)."""
    out = np.empty((len(t), traj.spec.m))
    segs = traj.segments
    k = 0
    for j, tj in enumerate(t):
        tf = Fraction(float(tj))
        while k + 1 < len(segs) and segs[k].t_end < tf:
            k += 1
        s = segs[k]
        tf = min(max(tf, s.t_start), s.t_end)
        out[j] = [float(v) for v in s.z_at(tf)]
    return out
