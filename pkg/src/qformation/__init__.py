"""One-dimensional formations driven by sign-quantized guidance.

Each agent only learns, per neighbour, whether the gap to that neighbour is
positive and whether it is too long or too short. The resulting vector field
is piecewise constant, so this package integrates it exactly: trajectories
are chains of straight segments with rational end points, and sliding along
the discontinuity surfaces is resolved through the Krasowskii convex hull.

Modules:
    model: formation parameters, the quantizer and the vector fields.
    hull: the convexified field at a point and equilibrium detection.
    solver: exact event-driven integration with sliding and branching.
    timestep: forward Euler and a hysteretic variant, used as oracles.
    analysis: Lyapunov bookkeeping, the three-agent basin classifier,
        run summaries.
    config, runs, cli: scenario files, run artifacts, command line.
"""

from .analysis import classify_basin_3agent, convergence_report, decay_bound, sampled_report
from .hull import Equilibrium, classify_equilibrium, contains_zero, hull_at
from .model import (
    FormationSpec,
    bit_budget,
    lyapunov,
    quantize,
    validate_gains_convergence,
    validate_gains_equilibrium,
    vector_field_x,
    vector_field_z,
    x_to_z,
    z_to_x,
)
from .solver import BranchPolicy, Mode, Terminal, resolve_boundary, simulate, sliding_velocity
from .timestep import simulate_euler, simulate_hysteresis

__version__ = "0.1.0"

__all__ = [
    "BranchPolicy",
    "Equilibrium",
    "FormationSpec",
    "Mode",
    "Terminal",
    "bit_budget",
    "classify_basin_3agent",
    "classify_equilibrium",
    "contains_zero",
    "convergence_report",
    "decay_bound",
    "hull_at",
    "lyapunov",
    "quantize",
    "resolve_boundary",
    "sampled_report",
    "simulate",
    "simulate_euler",
    "simulate_hysteresis",
    "sliding_velocity",
    "validate_gains_convergence",
    "validate_gains_equilibrium",
    "vector_field_x",
    "vector_field_z",
    "x_to_z",
    "z_to_x",
]
