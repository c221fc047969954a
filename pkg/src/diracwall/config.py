"""Experiment configuration records for the command-line driver.

A configuration file is YAML with one section per record, e.g.::

    energy: 1.8
    potential:
      family: V1
      window: [-1.0, 1.0]
      E0: 1.8
    solver:
      levels: 2
      n_x: 12
      n_y: 60

Unknown keys are rejected. ``--set section.key=value`` on the command line
overrides file values (values are parsed as YAML scalars or lists).
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import asdict, dataclass, field

import yaml

from .errors import ConfigError
from .potentials import Family, PotentialSpec
from .spectral_basis import MAX_NY, ModeIndex


@dataclass
class PotentialConfig:
    family: str = "V1"
    window: list = field(default_factory=lambda: [-1.0, 1.0])
    scale: float = 1.0
    E0: float | None = None
    const_value: float = 0.0

    def validate(self):
        try:
            Family(self.family)
        except ValueError:
            raise ConfigError(f"unknown potential family {self.family!r}") from None
        if self.family == Family.CUSTOM.value:
            raise ConfigError("Custom potentials need a Python callback and cannot be configured from a file")
        if len(self.window) != 2 or not float(self.window[0]) < float(self.window[1]):
            raise ConfigError(f"potential window must be [x_L, x_R] with x_L < x_R, got {self.window}")

    def build(self, E: float | None = None, scale: float | None = None) -> PotentialSpec:
        """Potential spec; ``E0`` falls back to ``E`` when unset (energy-following families)."""
        E0 = self.E0 if self.E0 is not None else E
        return PotentialSpec(
            family=Family(self.family),
            window=(float(self.window[0]), float(self.window[1])),
            scale=float(self.scale if scale is None else scale),
            E0=None if E0 is None else float(E0),
            const_value=float(self.const_value),
        )


@dataclass
class SolverConfig:
    levels: int = 0
    n_x: int = 12
    n_y: int = 60
    oversample: int = 20

    def validate(self):
        if self.levels < 0 or self.levels > 14:
            raise ConfigError("levels must be in 0..14")
        if self.n_x < 2:
            raise ConfigError("n_x must be >= 2")
        if not 1 <= self.n_y <= MAX_NY:
            raise ConfigError(f"n_y must be in 1..{MAX_NY}")
        if self.oversample < 0:
            raise ConfigError("oversample must be >= 0")


@dataclass
class GridConfig:
    start: float = -3.0
    stop: float = 3.0
    count: int = 61

    def validate(self):
        if self.count < 1:
            raise ConfigError("grid count must be >= 1")
        if self.count > 1 and not self.start < self.stop:
            raise ConfigError("grid needs start < stop")

    def values(self):
        import numpy as np

        return np.linspace(self.start, self.stop, self.count)


@dataclass
class GreenEvalConfig:
    energy: float = 1.8
    source: list = field(default_factory=lambda: [0.0, 1.0])
    x: GridConfig = field(default_factory=lambda: GridConfig(-2.0, 2.0, 41))
    y: GridConfig = field(default_factory=lambda: GridConfig(-6.0, 6.0, 49))
    truncations: list = field(default_factory=lambda: [100, 1000])

    def validate(self):
        _energy(self.energy)
        if len(self.source) != 2:
            raise ConfigError("source must be [x0, y0]")
        self.x.validate()
        self.y.validate()
        if not self.truncations or any(int(n) < 1 for n in self.truncations):
            raise ConfigError("truncations must be positive integers")


@dataclass
class SolveConfig:
    energy: float = 1.8
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    interval: list | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    incoming: list = field(default_factory=list)
    x: GridConfig = field(default_factory=lambda: GridConfig(-2.0, 2.0, 81))
    y: GridConfig = field(default_factory=lambda: GridConfig(-4.0, 4.0, 41))

    def validate(self):
        _energy(self.energy)
        self.potential.validate()
        self.solver.validate()
        _interval(self.interval)
        for m in self.incoming:
            _mode(m)
        self.x.validate()
        self.y.validate()


@dataclass
class ConductivitySweepConfig:
    energies: GridConfig = field(default_factory=lambda: GridConfig(1.5, 1.95, 5))
    scales: list = field(default_factory=lambda: [0.0, 0.5, 1.0, 1.5, 2.0])
    potential: PotentialConfig = field(default_factory=lambda: PotentialConfig("V0", [-1.0, 1.0]))
    interval: list | None = None
    x0: float = 0.0
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(4, 10, 100))
    tolerance: float = 1e-10

    def validate(self):
        self.energies.validate()
        for E in self.energies.values():
            _energy(E)
        self.potential.validate()
        self.solver.validate()
        _interval(self.interval)
        if not self.scales:
            raise ConfigError("scales must be non-empty")


@dataclass
class ScatteringSweepConfig:
    energy: float = 1.8
    potential: PotentialConfig = field(default_factory=lambda: PotentialConfig("V1", [0.0, 10.0]))
    leaf_length: float = 0.25
    n_leaves: int = 40
    start: float = 0.0
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(0, 10, 40))

    def validate(self):
        _energy(self.energy)
        self.potential.validate()
        self.solver.validate()
        if not self.leaf_length > 0:
            raise ConfigError("leaf_length must be positive")
        if self.n_leaves < 1:
            raise ConfigError("n_leaves must be >= 1")


@dataclass
class LocalizedConfig:
    energy: float = 1.8
    xi_inner: float = 1.0
    level: int = 2
    branch: int = 0
    length_shift: float = 0.0
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(0, 60, 20))
    x: GridConfig = field(default_factory=lambda: GridConfig(-4.0, 6.0, 101))
    y: GridConfig = field(default_factory=lambda: GridConfig(-4.0, 4.0, 41))
    null_threshold: float = 1e-8

    def validate(self):
        _energy(self.energy)
        if not self.xi_inner > 0:
            raise ConfigError("xi_inner must be positive")
        if self.level < 1:
            raise ConfigError("level must be >= 1")
        self.solver.validate()
        if self.solver.n_y <= self.level:
            raise ConfigError("n_y must exceed the trapped level")
        self.x.validate()
        self.y.validate()


@dataclass
class ConvergenceConfig:
    study: str = "density"
    energy: float = 1.8
    potential: PotentialConfig = field(default_factory=lambda: PotentialConfig("V1", [0.0, 100.0]))
    interval: list = field(default_factory=lambda: [0.0, 100.0 / 1024.0])
    incoming: str = "(0,-1)"
    reference: SolverConfig = field(default_factory=lambda: SolverConfig(0, 16, 300))
    n_x: list = field(default_factory=lambda: [4, 6, 8, 10, 12, 14])
    n_y: list = field(default_factory=lambda: [20, 40, 60, 80, 100, 150, 200])
    levels: list = field(default_factory=lambda: [0])

    def validate(self):
        if self.study not in ("density", "scattering"):
            raise ConfigError("study must be 'density' or 'scattering'")
        _energy(self.energy)
        self.potential.validate()
        _interval(self.interval)
        _mode(self.incoming)
        self.reference.validate()
        if any(int(n) < 2 for n in self.n_x) or any(not 1 <= int(n) <= MAX_NY for n in self.n_y):
            raise ConfigError("invalid n_x / n_y lists")
        if any(int(l) < 0 for l in self.levels):
            raise ConfigError("levels must be >= 0")


COMMANDS = {
    "green-eval": GreenEvalConfig,
    "solve": SolveConfig,
    "conductivity-sweep": ConductivitySweepConfig,
    "scattering-sweep": ScatteringSweepConfig,
    "localized": LocalizedConfig,
    "convergence": ConvergenceConfig,
}


def _energy(E):
    if not isinstance(E, (int, float)) or not float(E) > 0:
        raise ConfigError(f"energy must be a positive number, got {E!r}")


def _interval(iv):
    if iv is None:
        return
    if len(iv) != 2 or not float(iv[0]) < float(iv[1]):
        raise ConfigError(f"interval must be [x_L, x_R] with x_L < x_R, got {iv}")


def _mode(text):
    try:
        return ModeIndex.parse(str(text))
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad mode label {text!r}: {exc}") from None


def from_dict(cls, data: dict):
    """Build a (nested) config record from plain data, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"section for {cls.__name__} must be a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        tp = hints[key]
        if dataclasses.is_dataclass(tp):
            # nested sections start from the parent's default, not the section class default
            f = fields[key]
            base = asdict(f.default_factory()) if f.default_factory is not dataclasses.MISSING else {}
            if value is not None and not isinstance(value, dict):
                raise ConfigError(f"section {key!r} must be a mapping")
            base.update(value or {})
            kwargs[key] = from_dict(tp, base)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def to_dict(cfg) -> dict:
    return asdict(cfg)


def dumps(cfg) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def loads(cls, text: str):
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from None
    return from_dict(cls, data or {})


def apply_overrides(data: dict, overrides: list) -> dict:
    """Apply ``section.key=value`` strings to nested plain data (in place)."""
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"bad override value {raw!r}: {exc}") from None
        node = data
        parts = key.strip().split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-section")
        node[parts[-1]] = value
    return data


def load_config(command: str, path: str | None = None, overrides=None):
    cls = COMMANDS[command]
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config file: {exc}") from None
    data = apply_overrides(data, overrides)
    cfg = from_dict(cls, data)
    try:
        cfg.validate()
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return cfg
