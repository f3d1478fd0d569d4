"""Run configuration: a TOML document parsed into frozen dataclasses.

Sections and their defaults (every key is optional)::

    [mesh]         kind = "interval" | "disc", n = 64, length = 1.0, levels = 3
    [potential]    bulk = "regular", c, boundary (= bulk), c_boundary (= c)
    [coupling]     name = "default" | "zero"
    [scheme]       eps, n_blocks, dt, T, newton_tol, newton_max, dt_min, eta,
                   c_gamma, lumped_mu
    [initial.mu]   profile = "bump", value = 1.0, amplitude = 1.0, center, width,
                   lo, hi, seed, csv, column
    [initial.rho]  profile = "cosine", amplitude = 0.6, ...
    [control]      profile = "sinusoid" | "zero" | "constant" | "pulse",
                   amplitude = 0.5, period = 0.1, node, t_on, t_off
    [output]       snapshot_every = 10, vtk = false
    [stability]    scales = [0.1, 0.05, 0.025], direction = "constant", amplitude = 1.0
    [convergence]  parameter = "dt" | "eps" | "n_blocks" | "n", values = [...]
    [sweep.grid]   "section.key" = [values, ...]

Initial fields given by ``csv`` are read from a snapshot-style nodal CSV;
relative paths resolve against the directory of the configuration file.
"""
from __future__ import annotations

import itertools
import re
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Tuple, get_type_hints

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .discretization import MeshError, assemble, build_disc_mesh, build_interval_mesh
from .graphs import make_coupling, make_split
from .io import read_nodal_csv
from .problems import PROFILES, profile
from .stepper import (AssumptionError, Problem, SchemeConfig, constant_control,
                      pulse_control, sinusoid_control, validate_problem, zero_control)

POTENTIALS = ("regular", "logarithmic", "obstacle", "linear")
COUPLINGS = ("default", "zero")
CONTROLS = ("zero", "constant", "sinusoid", "pulse")
CONVERGENCE_PARAMETERS = ("dt", "eps", "n_blocks", "n")


class ConfigError(ValueError):
    """Invalid configuration.  ``violations`` lists every problem found;
    ``line`` is set for TOML syntax errors."""

    def __init__(self, violations, line: Optional[int] = None):
        self.violations = [violations] if isinstance(violations, str) else list(violations)
        self.line = line
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class MeshSpec:
    kind: str = "interval"
    n: int = 64
    length: float = 1.0
    levels: int = 3


@dataclass(frozen=True)
class PotentialSpec:
    bulk: str = "regular"
    c: Optional[float] = None
    boundary: Optional[str] = None
    c_boundary: Optional[float] = None


@dataclass(frozen=True)
class CouplingSpec:
    name: str = "default"


@dataclass(frozen=True)
class FieldSpec:
    profile: str = "constant"
    value: float = 0.0
    amplitude: float = 1.0
    center: float = 0.5
    width: float = 0.5
    lo: float = -0.5
    hi: float = 0.5
    seed: int = 0
    csv: Optional[str] = None
    column: Optional[str] = None


@dataclass(frozen=True)
class InitialSpec:
    mu: FieldSpec = FieldSpec(profile="bump", value=1.0, amplitude=1.0)
    rho: FieldSpec = FieldSpec(profile="cosine", value=0.0, amplitude=0.6)


@dataclass(frozen=True)
class ControlSpec:
    profile: str = "sinusoid"
    amplitude: float = 0.5
    period: float = 0.1
    node: int = 0
    t_on: float = 0.0
    t_off: float = 0.05


@dataclass(frozen=True)
class OutputSpec:
    snapshot_every: int = 10
    vtk: bool = False


@dataclass(frozen=True)
class StabilitySpec:
    scales: Tuple[float, ...] = (0.1, 0.05, 0.025)
    direction: str = "constant"
    amplitude: float = 1.0


@dataclass(frozen=True)
class ConvergenceSpec:
    parameter: str = "dt"
    values: Tuple[float, ...] = (1e-2, 5e-3, 2.5e-3)


@dataclass(frozen=True)
class SweepSpec:
    grid: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RunConfig:
    mesh: MeshSpec = MeshSpec()
    potential: PotentialSpec = PotentialSpec()
    coupling: CouplingSpec = CouplingSpec()
    scheme: SchemeConfig = SchemeConfig(eps=1e-3, n_blocks=10, dt=1e-3, T=0.1)
    initial: InitialSpec = InitialSpec()
    control: ControlSpec = ControlSpec()
    output: OutputSpec = OutputSpec()
    stability: StabilitySpec = StabilitySpec()
    convergence: ConvergenceSpec = ConvergenceSpec()
    sweep: SweepSpec = SweepSpec()
    base_dir: Optional[str] = field(default=None, compare=False)


# ---------------------------------------------------------------------------
# dict <-> dataclass

def _coerce(value, hint, where: str):
    text = str(hint)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if hint is float or text == "typing.Optional[float]":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if hint is str or text == "typing.Optional[str]":
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if text.startswith("typing.Tuple[float"):
        if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, (int, float))
                                              for v in value):
            raise ConfigError(f"{where}: expected a list of numbers, got {value!r}")
        return tuple(float(v) for v in value)
    if hint is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a table, got {value!r}")
        return value
    return value


def _build(default, data: dict, where: str):
    """Overlay a TOML table on a dataclass instance, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"[{where or 'top level'}] must be a table")
    hints = get_type_hints(type(default))
    names = {f.name for f in fields(default) if f.name != "base_dir"}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"[{where or 'top level'}]: unknown key(s) {', '.join(unknown)}")
    updates = {}
    for key, value in data.items():
        sub = getattr(default, key)
        if hasattr(sub, "__dataclass_fields__"):
            updates[key] = _build(sub, value, f"{where}.{key}" if where else key)
        else:
            updates[key] = _coerce(value, hints[key], f"{where}.{key}" if where else key)
    try:
        return replace(default, **updates)
    except ValueError as exc:   # SchemeConfig checks its own invariants
        raise ConfigError(f"[{where}]: {exc}") from exc


def _to_dict(obj) -> dict:
    out = {}
    for f in fields(obj):
        if f.name == "base_dir":
            continue
        value = getattr(obj, f.name)
        if value is None:
            continue
        if hasattr(value, "__dataclass_fields__"):
            value = _to_dict(value)
        elif isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    return out


def to_dict(cfg: RunConfig) -> dict:
    return _to_dict(cfg)


def serialize(cfg: RunConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))


# ---------------------------------------------------------------------------
# parsing and validation

def _syntax_line(exc: Exception, text: str) -> Optional[int]:
    line = getattr(exc, "lineno", None)
    if line is None:
        m = re.search(r"line (\d+)", str(exc))
        line = int(m.group(1)) if m else None
    return line


def parse_config(text: str, base_dir: Optional[str] = None, validate: bool = True) -> RunConfig:
    """Parse and validate a TOML configuration; raises ConfigError."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = _syntax_line(exc, text)
        raise ConfigError(f"syntax error at line {line}: {exc}", line=line) from exc
    cfg = _build(RunConfig(), data, "")
    pot = cfg.potential
    cfg = replace(cfg, base_dir=base_dir,
                  potential=replace(pot, boundary=pot.boundary or pot.bulk,
                                    c_boundary=pot.c if pot.c_boundary is None else pot.c_boundary))
    if validate:
        validate_config(cfg)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, base_dir=str(path.parent.resolve()))


def _static_violations(cfg: RunConfig) -> list:
    out = []
    m = cfg.mesh
    if m.kind not in ("interval", "disc"):
        out.append(f"mesh.kind: unknown mesh kind {m.kind!r} (interval or disc)")
    elif m.kind == "interval" and (m.n < 2 or m.length <= 0):
        out.append("mesh: interval needs n >= 2 and length > 0")
    elif m.kind == "disc" and not 0 <= m.levels <= 7:
        out.append("mesh.levels: disc refinement level must be in 0..7")
    p = cfg.potential
    for key, name, c in (("bulk", p.bulk, p.c), ("boundary", p.boundary, p.c_boundary)):
        if name not in POTENTIALS:
            out.append(f"potential.{key}: unknown potential {name!r}")
        elif name == "logarithmic" and c is not None and not c > 1:
            out.append(f"potential.{key}: the logarithmic potential requires c > 1 (got c = {c:g})")
        elif name == "obstacle" and c is not None and not c > 0:
            out.append(f"potential.{key}: the double-obstacle potential requires c > 0 (got c = {c:g})")
    if cfg.coupling.name not in COUPLINGS:
        out.append(f"coupling.name: unknown coupling {cfg.coupling.name!r}")
    try:
        cfg.scheme.n_steps
    except ValueError as exc:
        out.append(f"scheme: {exc}")
    for key in ("mu", "rho"):
        spec = getattr(cfg.initial, key)
        if spec.csv is None and spec.profile not in PROFILES:
            out.append(f"initial.{key}.profile: unknown profile {spec.profile!r}")
    c = cfg.control
    if c.profile not in CONTROLS:
        out.append(f"control.profile: unknown control {c.profile!r}")
    elif c.profile == "sinusoid" and not c.period > 0:
        out.append("control.period must be positive")
    elif c.profile == "pulse" and not c.t_off > c.t_on:
        out.append("control: pulse needs t_off > t_on")
    if cfg.output.snapshot_every < 0:
        out.append("output.snapshot_every must be >= 0")
    if cfg.stability.direction not in ("constant", "sinusoid"):
        out.append(f"stability.direction: unknown direction {cfg.stability.direction!r}")
    conv = cfg.convergence
    if conv.parameter not in CONVERGENCE_PARAMETERS:
        out.append(f"convergence.parameter: expected one of {', '.join(CONVERGENCE_PARAMETERS)}")
    elif len(conv.values) < 2:
        out.append("convergence.values: need at least two refinement levels")
    for key, values in cfg.sweep.grid.items():
        section, _, name = key.partition(".")
        target = getattr(cfg, section, None) if section in _SWEEPABLE else None
        if target is None or name not in {f.name for f in fields(target)}:
            out.append(f"sweep.grid: {key!r} does not name a configuration key")
        elif not isinstance(values, list):
            out.append(f"sweep.grid: {key!r} must map to a list")
    return out


_SWEEPABLE = ("mesh", "potential", "coupling", "scheme", "control")


def validate_config(cfg: RunConfig) -> None:
    """Raise ConfigError listing every violation, including the data
    assumptions checked on the assembled problem."""
    violations = _static_violations(cfg)
    if violations:
        raise ConfigError(violations)
    try:
        problem = build_problem(cfg)
        validate_problem(problem, cfg.scheme)
    except AssumptionError as exc:
        raise ConfigError(exc.violations) from exc
    except (ValueError, KeyError, OSError, IndexError) as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# problem construction

def build_mesh(cfg: RunConfig):
    m = cfg.mesh
    try:
        if m.kind == "interval":
            return build_interval_mesh(m.n, m.length)
        return build_disc_mesh(m.levels)
    except MeshError as exc:
        raise ConfigError(f"mesh: {exc}") from exc


def _field(cfg: RunConfig, mesh, name: str) -> np.ndarray:
    spec = getattr(cfg.initial, name)
    if spec.csv is not None:
        path = Path(spec.csv)
        if not path.is_absolute() and cfg.base_dir is not None:
            path = Path(cfg.base_dir) / path
        return read_nodal_csv(path, spec.column or name, mesh.n_nodes)
    return profile(mesh, spec.profile, value=spec.value, amplitude=spec.amplitude,
                   center=spec.center, width=spec.width, lo=spec.lo, hi=spec.hi, seed=spec.seed)


def build_control(cfg: RunConfig, nb: int):
    c = cfg.control
    if c.profile == "zero":
        return zero_control(nb)
    if c.profile == "constant":
        return constant_control(nb, c.amplitude)
    if c.profile == "sinusoid":
        return sinusoid_control(nb, c.amplitude, c.period)
    if not 0 <= c.node < nb:
        raise ConfigError(f"control.node: boundary node {c.node} out of range 0..{nb - 1}")
    return pulse_control(nb, c.node, c.amplitude, c.t_on, c.t_off)


def build_problem(cfg: RunConfig) -> Problem:
    mesh = build_mesh(cfg)
    ops = assemble(mesh)
    p = cfg.potential
    return Problem(ops, make_split(p.bulk, p.c), make_split(p.boundary or p.bulk, p.c_boundary),
                   make_coupling(cfg.coupling.name), _field(cfg, mesh, "mu"),
                   _field(cfg, mesh, "rho"), build_control(cfg, mesh.n_boundary))


def with_override(cfg: RunConfig, key: str, value) -> RunConfig:
    """Copy of ``cfg`` with ``section.name`` set to ``value`` (type-checked)."""
    section, _, name = key.partition(".")
    sub = getattr(cfg, section)
    return replace(cfg, **{section: _build(sub, {name: value}, section)})


def grid_points(cfg: RunConfig) -> list:
    """Cartesian product of the sweep grid as lists of (key, value) pairs."""
    grid = cfg.sweep.grid
    if not grid or any(len(v) == 0 for v in grid.values()):
        return []
    keys = list(grid)
    return [list(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
