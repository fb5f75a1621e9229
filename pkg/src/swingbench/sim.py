"""Fixed-step closed-loop runner and the recorded trajectory container.

The plant is integrated with RK4 at ``h``; the stabilizer is sampled every
``h_c`` and its output held in between.  Each recorded row holds the state
at a control tick together with the stabilizer output applied from that
tick on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, NumericalError
from .events import Event, check_events, pm_multiplier
from .fmt import fmt_float
from .plant import (GeneratorParams, NetworkParams, PlantState, _algebra, _rk4,
                    bus_voltage, init_equilibrium)

COLUMNS = ("t", "delta_rad", "omega_pu", "eqp_pu", "efd_pu", "vt_pu", "pe_pu", "upss_pu")


@dataclass(frozen=True)
class PlantConfig:
    gen: GeneratorParams = field(default_factory=GeneratorParams)
    net: NetworkParams = field(default_factory=NetworkParams)
    h: float = 1e-3
    h_c: float = 1e-2

    def __post_init__(self):
        if not (self.h > 0 and self.h_c > 0):
            raise ConfigError("step sizes must be > 0")
        ratio = self.h_c / self.h
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError("h_c must be an integer multiple of h")

    @property
    def substeps(self) -> int:
        return round(self.h_c / self.h)


@dataclass
class TimeSeries:
    """Uniformly sampled trajectory; ``columns`` maps column name to array."""

    h_c: float
    columns: dict[str, np.ndarray]
    truncated: bool = False
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __len__(self) -> int:
        return len(self.columns["t"])

    @property
    def t(self) -> np.ndarray:
        return self.columns["t"]

    @property
    def dw(self) -> np.ndarray:
        return self.columns["omega_pu"] - 1.0

    def to_csv(self, path) -> None:
        write_csv(path, list(self.columns), list(self.columns.values()))

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        names, data = read_csv(path)
        if "t" not in names:
            raise ValueError(f"{path}: no 't' column")
        t = data[names.index("t")]
        h_c = float(t[1] - t[0]) if len(t) > 1 else 0.0
        return cls(h_c, dict(zip(names, data)))


def write_csv(path, names: Sequence[str], cols: Sequence[np.ndarray]) -> None:
    rows = [",".join(names)]
    for vals in zip(*cols):
        rows.append(",".join(fmt_float(v) for v in vals))
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")


def read_csv(path) -> tuple[list[str], list[np.ndarray]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    names = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:] if ln],
                    dtype=float).reshape(-1, len(names))
    return names, [data[:, j].copy() for j in range(len(names))]


# policy(k, t, omega) -> upss
Policy = Callable[[int, float, float], float]


class Simulation:
    """Step-by-step closed loop from an equilibrium operating point.

    ``advance(upss)`` records the current tick and integrates one control
    period.  Events use the time at the middle of each integration step, so
    an event boundary on the ``h`` grid is never ambiguous.
    """

    def __init__(self, plant: PlantConfig, pe0: float, vt0: float,
                 events: Sequence[Event] = (), t_end: float = 15.0,
                 state: PlantState | None = None):
        check_events(events)
        self.plant = plant
        self.events = list(events)
        self.t_end = t_end
        eq_state, inputs = init_equilibrium(plant.gen, plant.net, pe0, vt0)
        self.inputs = inputs
        s = state or eq_state
        self.x = (s.delta, s.omega, s.eqp, s.efd)
        self.k = 0
        self.n_ticks = int(round(t_end / plant.h_c))
        self.lost_sync = False
        self._rows: list[tuple] = []

    @property
    def t(self) -> float:
        return self.k * self.plant.h_c

    @property
    def omega(self) -> float:
        return self.x[1]

    @property
    def state(self) -> PlantState:
        return PlantState(*self.x)

    @property
    def done(self) -> bool:
        return self.lost_sync or self.k > self.n_ticks

    def advance(self, upss: float) -> None:
        p = self.plant
        gp, h, xe = p.gen, p.h, p.net.xe
        t0 = self.t
        v_now = bus_voltage(p.net, t0 + 0.5 * h, self.events)
        _, _, pe, vt = _algebra(self.x[0], self.x[2], v_now, gp, xe)
        self._rows.append((t0, *self.x, vt, pe, upss))
        if self.k == self.n_ticks:
            self.k += 1
            return
        x = self.x
        vref = self.inputs.vref
        base = self.k * p.substeps
        for j in range(p.substeps):
            tm = (base + j + 0.5) * h
            v_bus = bus_voltage(p.net, tm, self.events)
            pm = self.inputs.pm * pm_multiplier(self.events, tm)
            x = _rk4(x, pm, vref, upss, v_bus, gp, xe, h)
        if not all(math.isfinite(v) for v in x):
            raise NumericalError("integration produced a non-finite state", t=t0 + p.h_c)
        self.x = x
        self.k += 1
        if abs(x[0]) > math.pi:
            self.lost_sync = True

    def series(self) -> TimeSeries:
        data = np.array(self._rows, dtype=float).reshape(-1, len(COLUMNS))
        cols = {name: data[:, j].copy() for j, name in enumerate(COLUMNS)}
        return TimeSeries(self.plant.h_c, cols, truncated=self.lost_sync)


def run_closed_loop(sim: Simulation, policy: Policy) -> TimeSeries:
    while not sim.done:
        sim.advance(policy(sim.k, sim.t, sim.omega))
    return sim.series()
