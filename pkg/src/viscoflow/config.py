"""Run configuration: INI-style ``key = value`` text with ``[section]``
headers, validated as a whole so every problem is reported at once."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional

from .errors import ConfigError
from .lame import PRECONDITIONERS, check_ellipticity
from .initial import PRESETS
from .transport import PROPAGATORS


@dataclass(frozen=True)
class GridConfig:
    dim: int = 2
    n: tuple = (32,)  # one entry for all axes, or one per axis
    length: float = 2 * math.pi

    def resolution(self):
        return self.n * self.dim if len(self.n) == 1 else self.n


@dataclass(frozen=True)
class PhysicsConfig:
    mu: float = 1.0
    lambda_: float = 0.0
    pressure_a: float = 1.0
    gamma: float = 1.4


@dataclass(frozen=True)
class InitialConfig:
    preset: str = "equilibrium"
    amplitude: Optional[float] = None  # None: the preset's own default
    mode: int = 1
    velocity: float = 0.0
    rho_bar: float = 1.0
    rho_file: str = ""
    u_file: str = ""
    F_file: str = ""


@dataclass(frozen=True)
class SteppingConfig:
    dt: float = 0.01
    t_final: float = 1.0
    picard_tol: float = 1e-8
    max_picard: int = 50
    relaxation: float = 1.0
    dt_min: float = 1e-8
    max_halvings: int = 10
    lame_tol: float = 1e-10
    lame_max_iter: int = 500
    preconditioner: str = "fft_constant_coefficient"
    propagator: str = "taylor2"
    monotone_density: bool = True
    ball_radius_guard: Optional[float] = None


@dataclass(frozen=True)
class MonitorConfig:
    enabled: bool = True
    q: float = 4.0
    curl_allowance: Optional[float] = None  # None: 10 h^2
    envelope_allowance: float = 0.0
    fnorm_allowance: float = 0.0
    fatal: bool = False


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "output"
    snapshot_every: int = 0  # 0: initial and final snapshots only
    figures: bool = True


@dataclass(frozen=True)
class RunSection:
    threads: int = 1
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    stepping: SteppingConfig = field(default_factory=SteppingConfig)
    monitors: MonitorConfig = field(default_factory=MonitorConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    run: RunSection = field(default_factory=RunSection)


SECTIONS = {f.name: f.default_factory for f in fields(RunConfig)}


def _key(name):
    return "lambda" if name == "lambda_" else name


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _parse_n(text):
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise ValueError("expected one or more integers")
    return tuple(int(p) for p in parts)


def _converter(cls, name, default):
    if cls is GridConfig and name == "n":
        return _parse_n
    if isinstance(default, bool):
        return _parse_bool
    if isinstance(default, int):
        return int
    if isinstance(default, float) or default is None:
        return lambda s: None if s.strip() == "" and default is None else float(s)
    return str


def _format(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _validate(cfg):
    errs = []
    g, p, s, m, i = cfg.grid, cfg.physics, cfg.stepping, cfg.monitors, cfg.initial
    if g.dim not in (2, 3):
        errs.append(f"grid.dim must be 2 or 3 (got {g.dim})")
    elif len(g.n) not in (1, g.dim):
        errs.append(f"grid.n needs 1 or {g.dim} entries (got {len(g.n)})")
    for k in g.n:
        if k < 8 or k & (k - 1):
            errs.append(f"grid.n = {k}: resolution must be a power of two ≥ 8")
    if not g.length > 0:
        errs.append(f"grid.length > 0 violated (got {g.length})")
    errs += [f"physics: {e}" for e in check_ellipticity(p.mu, p.lambda_)]
    if not p.pressure_a > 0:
        errs.append(f"physics: pressure_a > 0 violated (got {p.pressure_a})")
    if not p.gamma >= 1:
        errs.append(f"physics: gamma ≥ 1 violated (got {p.gamma})")
    if not s.dt > 0:
        errs.append(f"stepping: dt > 0 violated (got {s.dt})")
    if not s.t_final > 0:
        errs.append(f"stepping: t_final > 0 violated (got {s.t_final})")
    if not s.picard_tol > 0 or not s.lame_tol > 0:
        errs.append("stepping: tolerances must be positive")
    if not 0 < s.relaxation <= 1:
        errs.append(f"stepping: relaxation must lie in (0, 1] (got {s.relaxation})")
    if s.max_picard < 1 or s.lame_max_iter < 1 or s.max_halvings < 0:
        errs.append("stepping: iteration limits must be positive")
    if not 0 < s.dt_min <= max(s.dt, 0):
        errs.append(f"stepping: 0 < dt_min ≤ dt violated (dt_min = {s.dt_min})")
    if s.preconditioner not in PRECONDITIONERS:
        errs.append(f"stepping: preconditioner must be one of {', '.join(PRECONDITIONERS)}")
    if s.propagator not in PROPAGATORS:
        errs.append(f"stepping: propagator must be one of {', '.join(PROPAGATORS)}")
    if s.ball_radius_guard is not None and not s.ball_radius_guard > 0:
        errs.append("stepping: ball_radius_guard must be positive")
    if not 3 < m.q <= 6:
        errs.append(f"monitors: q must lie in (3, 6] (got {m.q})")
    if i.preset not in PRESETS:
        errs.append(f"initial: preset must be one of {', '.join(PRESETS)} (got {i.preset!r})")
    if i.preset == "files" and not (i.rho_file and i.u_file and i.F_file):
        errs.append("initial: preset 'files' needs rho_file, u_file and F_file")
    if not i.rho_bar > 0:
        errs.append(f"initial: rho_bar > 0 violated (got {i.rho_bar})")
    if cfg.output.snapshot_every < 0:
        errs.append("output: snapshot_every must be ≥ 0")
    if cfg.run.threads < 1:
        errs.append(f"run: threads ≥ 1 violated (got {cfg.run.threads})")
    return errs


def parse_config(text):
    """Parse and validate; raises ConfigError listing every problem."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"), default_section="\0")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc.message.strip()}"]) from None
    errs = []
    sections = {}
    for name in parser.sections():
        if name not in SECTIONS:
            errs.append(f"unknown section [{name}]")
            continue
        cls = type(SECTIONS[name]())
        defaults = cls()
        known = {_key(f.name): f.name for f in fields(cls)}
        values = {}
        for key, raw in parser.items(name):
            if key not in known:
                errs.append(f"[{name}] unknown key {key!r}")
                continue
            attr = known[key]
            try:
                values[attr] = _converter(cls, attr, getattr(defaults, attr))(raw)
            except ValueError as exc:
                errs.append(f"[{name}] {key} = {raw!r}: {exc}")
        sections[name] = replace(defaults, **values)
    cfg = RunConfig(**sections)
    errs += _validate(cfg)
    if errs:
        raise ConfigError(errs)
    return cfg


def serialize(cfg):
    lines = []
    for sec in fields(RunConfig):
        lines.append(f"[{sec.name}]")
        part = getattr(cfg, sec.name)
        for f in fields(part):
            lines.append(f"{_key(f.name)} = {_format(getattr(part, f.name))}".rstrip())
        lines.append("")
    return "\n".join(lines)


def load_config(path):
    from .errors import SnapshotIOError

    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SnapshotIOError(f"cannot read config {path}: {exc.strerror}", path=str(path)) from exc
    return parse_config(text)
