"""Scenario files: a flat YAML mapping with explicit keys.

Numbers are taken from their source text, so ``0.1`` means exactly 1/10
and ``1/3`` is accepted as a ratio. Every validation error names the line
of the offending key.

Example::

    n: 6
    d: 1                  # scalar is broadcast to all gaps
    k: [6, 5, 4, 3, 2]
    x0: [0, 0.5, 1, 2, 4, 5]
    solver: event         # event | euler | hysteresis
    t_max: 20
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

import yaml

from .model import FormationSpec, x_to_z
from .solver import BranchPolicy

SOLVERS = ("event", "euler", "hysteresis")
AXES = ("exclude", "include", "only")


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<config>", line: int | None = None):
        self.source = source
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class SweepGrid:
    lo: Fraction = Fraction(-3)
    hi: Fraction = Fraction(3)
    num: int = 21
    axes: str = "exclude"
    random_points: int = 0

    def points(self, seed: int = 0) -> list[tuple[Fraction, Fraction]]:
        if self.random_points:
            import numpy as np

            rng = np.random.default_rng(seed)
            scale = 1000
            raw = rng.integers(int(self.lo * scale), int(self.hi * scale) + 1, size=(self.random_points, 2))
            pts = [(Fraction(int(a), scale), Fraction(int(b), scale)) for a, b in raw]
        elif self.num <= 0:
            pts = []
        elif self.num == 1:
            pts = [(self.lo, self.lo)]
        else:
            step = (self.hi - self.lo) / (self.num - 1)
            axis = [self.lo + i * step for i in range(self.num)]
            pts = [(a, b) for a in axis for b in axis]
        if self.axes == "exclude":
            pts = [p for p in pts if p[0] * p[1] != 0]
        elif self.axes == "only":
            pts = [p for p in pts if p[0] * p[1] == 0]
        return pts


@dataclass(frozen=True)
class ScenarioConfig:
    spec: FormationSpec
    x0: tuple[Fraction, ...] | None
    z0: tuple[Fraction, ...]
    solver: str = "event"
    h: Fraction = Fraction(1, 1000)
    eps_h: Fraction = Fraction(1, 20)
    t_max: Fraction = Fraction(20)
    policy: BranchPolicy = BranchPolicy.DETERMINISTIC
    snap_tol: Fraction | None = None
    tol: Fraction = Fraction(0)
    output: str | None = None
    seed: int = 0
    max_events: int = 10_000
    name: str = ""
    sweep: SweepGrid | None = None

    @property
    def anchor(self) -> Fraction | None:
        return self.x0[-1] if self.x0 is not None else None

    def echo(self) -> dict:
        """Plain-data view of the scenario for summaries."""
        return {
            "name": self.name,
            "n": self.spec.n,
            "d": [str(v) for v in self.spec.d],
            "k": [str(v) for v in self.spec.k],
            "x0": [str(v) for v in self.x0] if self.x0 is not None else None,
            "z0": [str(v) for v in self.z0],
            "solver": self.solver,
            "policy": self.policy.value,
            "h": str(self.h),
            "eps_h": str(self.eps_h),
            "t_max": str(self.t_max),
            "snap_tol": str(self.snap_tol) if self.snap_tol is not None else None,
            "tol": str(self.tol),
            "seed": self.seed,
            "max_events": self.max_events,
        }


_TOP_KEYS = {
    "name", "description", "n", "d", "k", "x0", "z0", "solver", "h", "eps_h", "t_max",
    "policy", "snap_tol", "tol", "output", "seed", "max_events", "sweep",
}
_SWEEP_KEYS = {"lo", "hi", "num", "axes", "random_points"}


class _Reader:
    def __init__(self, source: str):
        self.source = source

    def fail(self, msg, node=None):
        line = node.start_mark.line + 1 if node is not None else None
        raise ConfigError(msg, self.source, line)

    def mapping(self, node) -> dict[str, tuple]:
        if not isinstance(node, yaml.MappingNode):
            self.fail("expected a mapping of keys to values", node)
        out = {}
        for key, value in node.value:
            if not isinstance(key, yaml.ScalarNode):
                self.fail("keys must be plain names", key)
            if key.value in out:
                self.fail(f"duplicate key {key.value!r}", key)
            out[key.value] = (key, value)
        return out

    def number(self, key, node) -> Fraction:
        if not isinstance(node, yaml.ScalarNode):
            self.fail(f"{key.value}: expected a number", key)
        try:
            return Fraction(node.value.strip())
        except (ValueError, ZeroDivisionError):
            self.fail(f"{key.value}: {node.value!r} is not a number", key)

    def integer(self, key, node) -> int:
        v = self.number(key, node)
        if v.denominator != 1:
            self.fail(f"{key.value}: expected an integer, got {node.value!r}", key)
        return int(v)

    def vector(self, key, node) -> list[Fraction]:
        if isinstance(node, yaml.ScalarNode):
            return [self.number(key, node)]
        if not isinstance(node, yaml.SequenceNode):
            self.fail(f"{key.value}: expected a list of numbers", key)
        return [self.number(key, item) for item in node.value]

    def text(self, key, node, choices=None) -> str:
        if not isinstance(node, yaml.ScalarNode):
            self.fail(f"{key.value}: expected text", key)
        v = node.value.strip()
        if choices is not None and v not in choices:
            self.fail(f"{key.value}: {v!r} is not one of {', '.join(choices)}", key)
        return v


def parse_config(text: str, source: str = "<config>", base_dir: Path | None = None) -> ScenarioConfig:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"unreadable YAML ({getattr(exc, 'problem', exc)})", source, line) from None
    r = _Reader(source)
    if root is None:
        r.fail("empty configuration")
    items = r.mapping(root)
    for name, (key, _) in items.items():
        if name not in _TOP_KEYS:
            r.fail(f"unknown key {name!r}", key)

    def get(name):
        return items.get(name, (None, None))

    key, node = get("n")
    if key is None:
        r.fail("missing required key 'n'")
    n = r.integer(key, node)
    if n < 2:
        r.fail("n: a formation needs at least 2 agents", key)

    for name in ("d", "k"):
        if name not in items:
            r.fail(f"missing required key {name!r}")
    dkey, dnode = get("d")
    d = r.vector(dkey, dnode)
    if len(d) == 1 and n > 2:
        d = d * (n - 1)
    if len(d) != n - 1:
        r.fail(f"d: expected {n - 1} gaps (or one scalar), got {len(d)}", dkey)
    if any(v <= 0 for v in d):
        r.fail("d: desired gaps must be positive", dkey)
    kkey, knode = get("k")
    k = r.vector(kkey, knode)
    if len(k) != n - 1:
        r.fail(f"k: expected {n - 1} gains, got {len(k)}", kkey)
    if any(v <= 0 for v in k):
        r.fail("k: gains must be positive", kkey)
    spec = FormationSpec(d, k)

    xkey, xnode = get("x0")
    zkey, znode = get("z0")
    if (xkey is None) == (zkey is None):
        r.fail("exactly one of 'x0' and 'z0' must be given", xkey or zkey)
    x0 = None
    if xkey is not None:
        x0 = tuple(r.vector(xkey, xnode))
        if len(x0) != n:
            r.fail(f"x0: expected {n} positions, got {len(x0)}", xkey)
        z0 = x_to_z(x0)
    else:
        z0 = tuple(r.vector(zkey, znode))
        if len(z0) != n - 1:
            r.fail(f"z0: expected {n - 1} relative positions, got {len(z0)}", zkey)

    kw = {}
    if "solver" in items:
        kw["solver"] = r.text(*items["solver"], SOLVERS)
    if "policy" in items:
        kw["policy"] = BranchPolicy(r.text(*items["policy"], [p.value for p in BranchPolicy]))
    for name in ("h", "eps_h", "t_max"):
        if name in items:
            v = r.number(*items[name])
            if v <= 0:
                r.fail(f"{name}: must be positive", items[name][0])
            kw[name] = v
    for name in ("snap_tol", "tol"):
        if name in items:
            v = r.number(*items[name])
            if v < 0:
                r.fail(f"{name}: must be non-negative", items[name][0])
            kw[name] = v
    for name in ("seed", "max_events"):
        if name in items:
            kw[name] = r.integer(*items[name])
    if "max_events" in kw and kw["max_events"] < 1:
        r.fail("max_events: must be at least 1", items["max_events"][0])
    if "name" in items:
        kw["name"] = r.text(*items["name"])
    if "output" in items:
        out = Path(r.text(*items["output"]))
        if base_dir is not None and not out.is_absolute():
            out = base_dir / out
        kw["output"] = str(out)
    if "sweep" in items:
        kw["sweep"] = _parse_sweep(r, *items["sweep"])
    return ScenarioConfig(spec=spec, x0=x0, z0=tuple(z0), **kw)


def _parse_sweep(r: _Reader, key, node) -> SweepGrid:
    items = r.mapping(node)
    kw = {}
    for name, (k, v) in items.items():
        if name not in _SWEEP_KEYS:
            r.fail(f"sweep: unknown key {name!r}", k)
        if name in ("lo", "hi"):
            kw[name] = r.number(k, v)
        elif name in ("num", "random_points"):
            kw[name] = r.integer(k, v)
            if kw[name] < 0:
                r.fail(f"sweep.{name}: must be non-negative", k)
        else:
            kw[name] = r.text(k, v, AXES)
    grid = SweepGrid(**kw)
    if grid.hi < grid.lo:
        r.fail("sweep: hi must not be below lo", key)
    return grid


def bundled_scenarios() -> list[str]:
    folder = resources.files("qformation") / "scenarios"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".yaml"))


def load_config(path_or_name: str | Path) -> ScenarioConfig:
    """Load a scenario file, or a bundled scenario by name."""
    path = Path(path_or_name)
    if path.is_file():
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read file ({exc.strerror})", str(path)) from None
        return parse_config(text, str(path), path.parent)
    name = str(path_or_name)
    if name.endswith(".yaml"):
        name = name[:-5]
    if name in bundled_scenarios():
        res = resources.files("qformation") / "scenarios" / f"{name}.yaml"
        return parse_config(res.read_text(), f"<bundled:{name}>")
    raise ConfigError("no such file or bundled scenario", str(path_or_name))
