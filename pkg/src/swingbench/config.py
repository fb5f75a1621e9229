"""Run configuration: a flat ``section.key = value`` text file.

Blank lines and ``#`` comments are ignored.  Every key maps onto a field of
one of the parameter dataclasses, so the defaults documented there are the
defaults here.  Unknown sections or keys are rejected with the line number.

Example::

    # heavier fault, longer horizon
    network.v_fault = 0.75
    scenario.t_end = 20
    scenario.faults = 0.2:0.5, 10.0:0.1:0.85
    identifier.hidden = 12, 12
    seed = 7
"""

from __future__ import annotations

import math
import os
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .controller import ControllerConfig
from .cpss import CpssParams
from .errors import ConfigError
from .excitation import ExcitationConfig
from .identifier import IdentifierConfig
from .plant import GeneratorParams, NetworkParams
from .scenarios import Scenario, get_scenario, parse_events
from .sim import PlantConfig

SEED_ENV = "SWINGBENCH_SEED"


@dataclass(frozen=True)
class SimSettings:
    h: float = 1e-3
    h_c: float = 1e-2


@dataclass(frozen=True)
class ScenarioOverrides:
    """Optional replacements for the selected scenario's fields."""

    pe0: float | None = None
    vt0: float | None = None
    t_end: float | None = None
    faults: str | None = None
    load_steps: str | None = None


_SECTIONS = {
    "plant": GeneratorParams,
    "network": NetworkParams,
    "cpss": CpssParams,
    "identifier": IdentifierConfig,
    "controller": ControllerConfig,
    "excitation": ExcitationConfig,
    "sim": SimSettings,
    "scenario": ScenarioOverrides,
}
# the CPSS sample period always follows sim.h_c
_HIDDEN = {("cpss", "h_c")}
# friendlier alias for the base angular frequency
_ALIASES = {("plant", "f_base"): ("plant", "omega_base", lambda f: 2.0 * math.pi * f)}


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _converter(tp):
    """Text parser for a dataclass field annotation (evaluated type)."""
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if tp is bool:
        return _parse_bool
    if tp in (int, float, str):
        return tp
    if origin is tuple:
        inner = _converter(args[0])
        return lambda s: tuple(inner(p.strip()) for p in s.split(",") if p.strip())
    if origin is typing.Union or type(tp).__name__ == "UnionType":
        real = [a for a in args if a is not type(None)]
        return _converter(real[0])
    raise TypeError(f"unsupported config field type {tp!r}")


def _field_types(cls) -> dict[str, object]:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in fields(cls)}


def _format_value(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, tuple):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class Config:
    plant: GeneratorParams = field(default_factory=GeneratorParams)
    network: NetworkParams = field(default_factory=NetworkParams)
    cpss: CpssParams = field(default_factory=CpssParams)
    identifier: IdentifierConfig = field(default_factory=IdentifierConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    excitation: ExcitationConfig = field(default_factory=ExcitationConfig)
    sim: SimSettings = field(default_factory=SimSettings)
    scenario: ScenarioOverrides = field(default_factory=ScenarioOverrides)
    seed: int | None = None

    @property
    def plant_config(self) -> PlantConfig:
        return PlantConfig(self.plant, self.network, self.sim.h, self.sim.h_c)

    def with_seed(self, seed: int | None) -> "Config":
        """Apply a global seed to every seeded component."""
        if seed is None:
            return self
        return replace(
            self, seed=seed,
            identifier=replace(self.identifier, seed=seed),
            controller=replace(self.controller, seed=seed),
            excitation=replace(self.excitation, seed=seed),
        )

    def scenario_named(self, name: str) -> Scenario:
        """Built-in scenario with the ``scenario.*`` overrides applied."""
        base = get_scenario(name)
        ov = self.scenario
        events = base.events
        if ov.faults is not None or ov.load_steps is not None:
            events = parse_events(ov.faults or "", ov.load_steps or "")
        return Scenario(
            base.name,
            base.pe0 if ov.pe0 is None else ov.pe0,
            base.vt0 if ov.vt0 is None else ov.vt0,
            events,
            base.t_end if ov.t_end is None else ov.t_end,
        )

    def resolved(self) -> dict[str, str]:
        """Every effective key and value, as they would be written in a config file."""
        out: dict[str, str] = {}
        for section in _SECTIONS:
            obj = getattr(self, section)
            for f in fields(obj):
                if (section, f.name) in _HIDDEN:
                    continue
                v = getattr(obj, f.name)
                if v is not None:
                    out[f"{section}.{f.name}"] = _format_value(v)
        if self.seed is not None:
            out["seed"] = str(self.seed)
        return out


def parse_config(text: str, source: str = "<config>") -> Config:
    values: dict[str, dict[str, object]] = {s: {} for s in _SECTIONS}
    seed = None
    types = {s: _field_types(cls) for s, cls in _SECTIONS.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip(), value.strip()
        where = f"{source}:{lineno}"
        if not eq or not key:
            raise ConfigError(f"{where}: expected 'section.key = value'")
        try:
            if key == "seed":
                seed = int(value)
                continue
            section, dot, name = key.partition(".")
            if not dot or section not in _SECTIONS:
                raise ConfigError(f"{where}: unknown key {key!r}")
            conv = None
            if (section, name) in _ALIASES:
                _, name, conv = _ALIASES[(section, name)]
                value = float(value)
            if name not in types[section] or (section, name) in _HIDDEN:
                raise ConfigError(f"{where}: unknown key {key!r}")
            if conv is None:
                values[section][name] = _converter(types[section][name])(value)
            else:
                values[section][name] = conv(value)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None
    sim = SimSettings(**values["sim"])
    built = {s: cls(**values[s]) for s, cls in _SECTIONS.items() if s not in ("cpss", "sim")}
    cpss = CpssParams(**{**values["cpss"], "h_c": sim.h_c})
    cfg = Config(cpss=cpss, sim=sim, **built)
    if cfg.cpss.u_max != cfg.controller.u_max:
        raise ConfigError("cpss.u_max and controller.u_max must agree (shared limit)")
    if cfg.excitation.amplitude > cfg.controller.u_max:
        raise ConfigError("excitation.amplitude must not exceed the stabilizer limit u_max")
    PlantConfig(cfg.plant, cfg.network, sim.h, sim.h_c)  # validates the step sizes
    return replace(cfg, seed=seed)


def load_config(path=None) -> Config:
    if path is None:
        return Config()
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(p))


def resolve_seed(cli_seed: int | None, cfg: Config) -> int | None:
    """Command-line seed, else SWINGBENCH_SEED, else the config file's ``seed``."""
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return cfg.seed
