"""Disturbance events applied to the SMIB plant."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .errors import ConfigError


@dataclass(frozen=True)
class Fault:
    """Three-phase fault: the infinite-bus voltage drops for ``duration`` seconds.

    ``v_fault`` of None means "use the network default".
    """

    t_start: float
    duration: float
    v_fault: Optional[float] = None

    def __post_init__(self):
        if self.t_start < 0:
            raise ConfigError(f"fault t_start must be >= 0, got {self.t_start}")
        if self.duration <= 0:
            raise ConfigError(f"fault duration must be > 0, got {self.duration}")
        if self.v_fault is not None and self.v_fault < 0:
            raise ConfigError(f"fault voltage must be >= 0, got {self.v_fault}")

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration

    @property
    def t(self) -> float:
        return self.t_start

    def active(self, t: float) -> bool:
        return self.t_start <= t < self.t_end


@dataclass(frozen=True)
class LoadStep:
    """Step of ``fraction`` (0.1 = +10 %) in mechanical power at time ``t``."""

    t: float
    fraction: float

    def __post_init__(self):
        if self.t < 0:
            raise ConfigError(f"load step time must be >= 0, got {self.t}")
        if self.fraction <= -1:
            raise ConfigError(f"load step fraction must be > -1, got {self.fraction}")

    @property
    def t_end(self) -> float:
        return self.t

    def active(self, t: float) -> bool:
        return t >= self.t


Event = Union[Fault, LoadStep]


def check_events(events: Sequence[Event]) -> None:
    """Reject unsorted event lists and overlapping faults."""
    times = [ev.t for ev in events]
    if times != sorted(times):
        raise ConfigError("events must be sorted by start time")
    faults = [ev for ev in events if isinstance(ev, Fault)]
    for a, b in zip(faults, faults[1:]):
        if b.t_start < a.t_end:
            raise ConfigError(
                f"overlapping faults: [{a.t_start}, {a.t_end}) and [{b.t_start}, {b.t_end})"
            )


def pm_multiplier(events: Sequence[Event], t: float) -> float:
    m = 1.0
    for ev in events:
        if isinstance(ev, LoadStep) and ev.active(t):
            m *= 1.0 + ev.fraction
    return m
