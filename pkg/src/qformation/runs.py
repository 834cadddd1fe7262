"""Running scenarios and writing/reading their artifacts.

A run directory holds three files:

``trajectory.csv``
    ``t, z_1..z_{n-1}, x_1..x_n, V, mode, active_set, branch`` followed by
    exact ``p/q`` copies of ``t`` and ``z`` for event runs. The ``x``
    columns are present only when the scenario gave absolute positions.
    Event runs have one row per segment endpoint, stepped runs one per sample.
``events.jsonl``
    One JSON object per event: ``t``, ``t_exact``, ``kind``, ``coords``
    (1-based), ``detail``, ``branch``.
``summary.json``
    Scenario echo, per-branch terminal data, bit budget, exit code.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from .analysis import classify_basin_3agent, convergence_report, sampled_report, sliding_fraction
from .config import ScenarioConfig, SweepGrid
from .hull import Equilibrium
from .model import bit_budget, lyapunov, speed_bound, z_to_x
from .solver import BranchPolicy, Terminal, Trajectory, simulate
from .timestep import SampledTrajectory, simulate_euler, simulate_hysteresis

EXIT_DESIRED = 0
EXIT_CONFIG = 1
EXIT_DEGENERATE = 2
EXIT_TIMEOUT = 3

TRAJECTORY_FILE = "trajectory.csv"
EVENTS_FILE = "events.jsonl"
SUMMARY_FILE = "summary.json"


def exact_pair(v: Fraction | None) -> dict | None:
    if v is None:
        return None
    return {"exact": str(v), "decimal": float(v)}


def _exact_vec(z) -> dict:
    return {"exact": [str(v) for v in z], "decimal": [float(v) for v in z]}


def simulate_config(cfg: ScenarioConfig):
    """Run the configured solver; exact runs always return a list of branches."""
    if cfg.solver == "event":
        out = simulate(
            cfg.z0, cfg.spec, cfg.t_max, policy=cfg.policy, snap_tol=cfg.snap_tol,
            max_events=cfg.max_events,
        )
        return out if isinstance(out, list) else [out]
    if cfg.solver == "euler":
        return simulate_euler(cfg.z0, cfg.spec, float(cfg.h), cfg.t_max)
    return simulate_hysteresis(cfg.z0, cfg.spec, float(cfg.h), float(cfg.eps_h), cfg.t_max)


def _class_code(cls: Equilibrium | None, timed_out: bool) -> int:
    if timed_out or cls is None or cls is Equilibrium.NOT_EQUILIBRIUM:
        return EXIT_TIMEOUT
    return EXIT_DESIRED if cls is Equilibrium.DESIRED else EXIT_DEGENERATE


def summarize(cfg: ScenarioConfig, result) -> dict:
    """The in-memory summary that is written to ``summary.json``."""
    budget = bit_budget(cfg.spec)
    summary = {
        "scenario": cfg.echo(),
        "bit_budget": {
            "per_agent": list(budget.per_agent),
            "total": budget.total,
            "stated_total_4n_minus_2": budget.stated_total,
        },
    }
    if isinstance(result, SampledTrajectory):
        tol = None
        if cfg.solver == "hysteresis":
            # the held outputs let a coordinate wander a full band past its surface
            tol = float(cfg.eps_h) + result.h * float(max(speed_bound(cfg.spec)))
        rep = sampled_report(result, cfg.spec, tol)
        code = _class_code(rep.terminal_class, False)
        summary["solver"] = {"kind": cfg.solver, "h": float(cfg.h), "samples": len(result.t)}
        summary["sampled"] = {
            "terminal_class": rep.terminal_class.value if rep.terminal_class else "not_converged",
            "terminal_state": list(rep.terminal_state),
            "terminal_mean": list(rep.terminal_mean),
            "tol": rep.tol,
            "time_to_e1": rep.time_to_e1,
            "time_to_e2": rep.time_to_e2,
            "chatter_band": list(rep.chatter_band),
            "max_v_increase": rep.max_v_increase,
        }
        summary["terminal_class"] = summary["sampled"]["terminal_class"]
    else:
        branches = []
        codes = []
        for traj in result:
            rep = convergence_report(traj, cfg.tol)
            timed_out = traj.terminal is Terminal.TIMEOUT
            cls = rep.terminal_class
            codes.append(_class_code(cls, timed_out))
            branches.append({
                "branch": traj.branch,
                "terminal": traj.terminal.value,
                "terminal_class": "timeout" if timed_out else cls.value,
                "terminal_state": _exact_vec(rep.terminal_state),
                "terminal_V": exact_pair(lyapunov(rep.terminal_state, cfg.spec)),
                "rest_time": exact_pair(rep.rest_time),
                "time_to_e1": exact_pair(rep.time_to_e1),
                "time_to_e2": exact_pair(rep.time_to_e2),
                "event_count": rep.event_count,
                "sliding_duration": exact_pair(rep.sliding_duration),
                "sliding_fraction": float(sliding_fraction(traj)),
            })
        summary["solver"] = {"kind": "event", "policy": cfg.policy.value, "branches": len(branches)}
        summary["branches"] = branches
        code = EXIT_TIMEOUT if EXIT_TIMEOUT in codes else max(codes)
        summary["terminal_class"] = (
            branches[0]["terminal_class"] if len(branches) == 1
            else sorted({b["terminal_class"] for b in branches})
        )
    summary["exit_code"] = code
    return summary


def _row_exact(t, z):
    return [str(t)] + [str(v) for v in z]


def write_run(cfg: ScenarioConfig, result, outdir: Path) -> dict:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    summary = summarize(cfg, result)
    m, n = cfg.spec.m, cfg.spec.n
    anchor = cfg.anchor
    header = ["t"] + [f"z_{i + 1}" for i in range(m)]
    if anchor is not None:
        header += [f"x_{i + 1}" for i in range(n)]
    header += ["V", "mode", "active_set", "branch"]
    exact = not isinstance(result, SampledTrajectory)
    if exact:
        header += ["t_exact"] + [f"z_{i + 1}_exact" for i in range(m)]

    with open(outdir / TRAJECTORY_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        if exact:
            for traj in result:
                for row in _trajectory_rows(traj, anchor):
                    w.writerow(row)
        else:
            _write_samples(w, result, cfg, anchor)

    with open(outdir / EVENTS_FILE, "w") as fh:
        if exact:
            for traj in result:
                for ev in traj.events:
                    fh.write(json.dumps({
                        "t": float(ev.t),
                        "t_exact": str(ev.t),
                        "kind": ev.kind.value,
                        "coords": [c + 1 for c in ev.coords],
                        "detail": ev.detail,
                        "branch": traj.branch,
                    }, sort_keys=True) + "\n")

    with open(outdir / SUMMARY_FILE, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _trajectory_rows(traj: Trajectory, anchor):
    spec = traj.spec
    xn = anchor
    points = []
    for seg in traj.segments:
        points.append((seg.t_start, seg.z_start, seg, xn))
        if xn is not None:
            xn = xn + seg.duration * seg.q[-1]
    last = traj.segments[-1]
    points.append((last.t_end, last.z_end, last, xn))
    for t, z, seg, xn in points:
        row = [float(t)] + [float(v) for v in z]
        if anchor is not None:
            row += [float(v) for v in z_to_x(z, xn)]
        row += [
            float(lyapunov(z, spec)),
            seg.mode.value,
            " ".join(str(i + 1) for i in seg.sliding),
            traj.branch,
        ]
        row += _row_exact(t, z)
        yield row


def _write_samples(w, run: SampledTrajectory, cfg, anchor):
    xn = None
    if anchor is not None:
        xn = float(anchor) + np.concatenate([[0.0], np.cumsum(run.h * run.q[:-1, -1])])
    for j in range(len(run.t)):
        row = [float(run.t[j])] + [float(v) for v in run.z[j]]
        if xn is not None:
            row += [float(v) for v in z_to_x(list(run.z[j]), xn[j])]
        row += [float(run.V[j]), cfg.solver, "", "0"]
        w.writerow(row)


def load_summary(rundir: Path) -> dict:
    with open(Path(rundir) / SUMMARY_FILE) as fh:
        return json.load(fh)


def load_trajectory_table(rundir: Path) -> list[dict]:
    with open(Path(rundir) / TRAJECTORY_FILE, newline="") as fh:
        return list(csv.DictReader(fh))


def load_events(rundir: Path) -> list[dict]:
    with open(Path(rundir) / EVENTS_FILE) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def chatter_band_from_table(rows: list[dict], coord: int, t_from: float) -> float:
    vals = [float(r[f"z_{coord}"]) for r in rows if float(r["t"]) >= t_from]
    return max(vals) - min(vals) if vals else 0.0


def format_report(rundir: Path) -> str:
    """Human-readable report of a run directory."""
    summary = load_summary(rundir)
    rows = load_trajectory_table(rundir)
    events = load_events(rundir)
    sc = summary["scenario"]
    lines = [f"run: {Path(rundir)}"]
    if sc.get("name"):
        lines.append(f"scenario: {sc['name']}")
    lines.append(f"agents: {sc['n']}  gains: {', '.join(sc['k'])}  gaps: {', '.join(sc['d'])}")
    lines.append(f"solver: {summary['solver']['kind']}")
    if "sampled" in summary:
        s = summary["sampled"]
        lines.append(f"terminal: {s['terminal_class']}")
        if s["terminal_class"] == "not_converged":
            lines.append("WARNING: run did not settle near the equilibrium set (non-convergence)")
        lines.append(f"time to E1 (tol {s['tol']:.3g}): {_fmt(s['time_to_e1'])}")
        lines.append(f"time to E2 (tol {s['tol']:.3g}): {_fmt(s['time_to_e2'])}")
        t_from = s["time_to_e2"] if s["time_to_e2"] is not None else float(rows[-1]["t"])
        band = chatter_band_from_table(rows, 1, t_from)
        lines.append(f"z_1 chattering band after settling: {band:.6g}")
        lines.append(f"largest per-step V increase: {s['max_v_increase']:.3g}")
    else:
        for b in summary["branches"]:
            tag = f"branch {b['branch']}: " if len(summary["branches"]) > 1 else ""
            lines.append(f"{tag}terminal: {b['terminal_class']} at "
                         f"({', '.join(b['terminal_state']['exact'])})")
            if b["terminal"] == Terminal.TIMEOUT.value:
                lines.append(f"{tag}WARNING: timeout, the run did not converge")
            lines.append(f"{tag}rest time: {_fmt_pair(b['rest_time'])}  "
                         f"time to E1: {_fmt_pair(b['time_to_e1'])}  "
                         f"time to E2: {_fmt_pair(b['time_to_e2'])}")
            lines.append(f"{tag}sliding fraction: {b['sliding_fraction']:.4f}  "
                         f"events: {b['event_count']}")
        lines.append(f"events logged: {len(events)}")
    n = len(summary["bit_budget"]["per_agent"])
    lines.append("bandwidth: " + bit_budget(n).describe().replace("\n", "\n  "))
    return "\n".join(lines)


def _fmt(v):
    return "never" if v is None else f"{v:.6g}"


def _fmt_pair(p):
    return "never" if p is None else f"{p['exact']} (~{p['decimal']:.6g})"


# -- sweeps ------------------------------------------------------------------


def _fmt_point(p) -> str:
    return "(" + ",".join(str(v) for v in p) + ")"


def sweep_point(args) -> dict:
    z0, spec, t_max, policy, max_events = args
    pred = classify_basin_3agent(z0, spec.d)
    out = simulate(z0, spec, t_max, policy=policy, max_events=max_events)
    trajs = out if isinstance(out, list) else [out]
    terminals = {t.z_end for t in trajs if t.terminal is Terminal.EQUILIBRIUM_REACHED}
    timed_out = any(t.terminal is Terminal.TIMEOUT for t in trajs)
    if pred.deterministic:
        agree = not timed_out and terminals == set(pred.limits)
        if agree and pred.finite_time_bound is not None:
            agree = all(t.rest_time <= pred.finite_time_bound for t in trajs)
    elif policy is BranchPolicy.ENUMERATE:
        agree = not timed_out and terminals == set(pred.limits)
    else:
        agree = not timed_out and terminals <= set(pred.limits)
    return {
        "z0_1": str(z0[0]),
        "z0_2": str(z0[1]),
        "on_axis": int(z0[0] * z0[1] == 0),
        "predicted": ";".join(_fmt_point(p) for p in sorted(pred.limits)),
        "time_bound": "" if pred.finite_time_bound is None else str(pred.finite_time_bound),
        "simulated": ";".join(_fmt_point(p) for p in sorted(terminals)),
        "branches": len(trajs),
        "agreement": int(agree),
    }


SWEEP_COLUMNS = ["z0_1", "z0_2", "on_axis", "predicted", "time_bound", "simulated", "branches", "agreement"]


def run_sweep(cfg: ScenarioConfig, jobs: int = 1) -> list[dict]:
    if cfg.spec.n != 3:
        raise ValueError("basin sweeps compare against the three-agent classifier (n=3)")
    if any(k != 1 for k in cfg.spec.k):
        raise ValueError("the three-agent classifier assumes gains k = (1, 1)")
    grid = cfg.sweep or SweepGrid()
    tasks = [(p, cfg.spec, cfg.t_max, cfg.policy, cfg.max_events) for p in grid.points(cfg.seed)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(sweep_point, tasks, chunksize=16))
    return [sweep_point(t) for t in tasks]


def write_sweep(rows: list[dict], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
