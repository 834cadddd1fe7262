"""Command-line front end: ``qformation run | sweep | report | scenarios``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, bundled_scenarios, load_config
from .runs import (
    EXIT_CONFIG,
    format_report,
    run_sweep,
    simulate_config,
    write_run,
    write_sweep,
)
from .solver import EventOverflow


def _output_dir(cfg, override: str | None, default_name: str) -> Path:
    if override:
        return Path(override)
    if cfg.output:
        return Path(cfg.output)
    return Path("runs") / (cfg.name or default_name)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    outdir = _output_dir(cfg, args.output, Path(args.config).stem)
    try:
        result = simulate_config(cfg)
    except EventOverflow as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary = write_run(cfg, result, outdir)
    print(format_report(outdir))
    return summary["exit_code"]


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    outdir = _output_dir(cfg, args.output, Path(args.config).stem)
    try:
        rows = run_sweep(cfg, jobs=args.jobs)
    except ValueError as exc:
        raise ConfigError(str(exc), str(args.config)) from None
    write_sweep(rows, outdir / "sweep.csv")
    agree = sum(r["agreement"] for r in rows)
    print(f"{len(rows)} starts, {agree} agree with the basin classifier -> {outdir / 'sweep.csv'}")
    return 0


def cmd_report(args) -> int:
    rundir = Path(args.rundir)
    try:
        print(format_report(rundir))
    except FileNotFoundError as exc:
        print(f"error: {rundir}: missing run output {Path(exc.filename).name}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


def cmd_scenarios(args) -> int:
    for name in bundled_scenarios():
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qformation",
        description="Simulate 1-D formations steered by one-bit sign guidance.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario and write its artifacts")
    r.add_argument("config", help="scenario YAML file or bundled scenario name")
    r.add_argument("-o", "--output", help="run directory (overrides the config)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="compare the 3-agent basin classifier with the solver")
    s.add_argument("config")
    s.add_argument("-o", "--output")
    s.add_argument("-j", "--jobs", type=int, default=1, help="worker processes")
    s.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("report", help="summarize a run directory")
    rep.add_argument("rundir")
    rep.set_defaults(func=cmd_report)

    sc = sub.add_parser("scenarios", help="list bundled scenarios")
    sc.set_defaults(func=cmd_scenarios)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
