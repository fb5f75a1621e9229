"""Multisine identification signal and the open-loop data-collection run."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .sim import PlantConfig, Simulation, TimeSeries, run_closed_loop

BOUND_DW = 0.02


@dataclass(frozen=True)
class ExcitationConfig:
    n_sines: int = 12
    f_min: float = 0.3
    f_max: float = 3.5
    amplitude: float = 0.05
    duration: float = 60.0
    seed: int = 0

    def __post_init__(self):
        if self.n_sines < 1:
            raise ConfigError("excitation.n_sines must be >= 1")
        if not 0 < self.f_min < self.f_max:
            raise ConfigError("excitation needs 0 < f_min < f_max")
        if self.amplitude < 0:
            raise ConfigError("excitation.amplitude must be >= 0")
        if self.duration < 10.0 / self.f_min:
            raise ConfigError("excitation.duration must be >= 10 / f_min")


class Multisine:
    """Sum of sines on exact DFT bins of the ``duration`` record.

    Frequencies are log-spaced on [f_min, f_max] (the geometric mean for a
    single sine) and rounded to multiples of 1/duration, so a record of the
    full duration holds an integer number of periods of every component.
    Phases are uniform on [0, 2*pi) from PCG64(seed) unless given.
    """

    def __init__(self, cfg: ExcitationConfig, h_c: float = 0.01, phases=None):
        self.cfg = cfg
        if cfg.n_sines == 1:
            raw = np.array([math.sqrt(cfg.f_min * cfg.f_max)])
        else:
            raw = np.geomspace(cfg.f_min, cfg.f_max, cfg.n_sines)
        bins = np.round(raw * cfg.duration).astype(int)
        if len(set(bins)) != len(bins) or bins.min() < 1:
            raise ConfigError("excitation frequencies collide on the DFT grid; "
                              "use a longer duration or fewer sines")
        self.bins = bins
        self.freqs = bins / cfg.duration
        if phases is None:
            rng = np.random.Generator(np.random.PCG64(cfg.seed))
            phases = rng.uniform(0.0, 2.0 * math.pi, size=cfg.n_sines)
        self.phases = np.asarray(phases, dtype=float)
        grid = np.arange(int(round(cfg.duration / h_c)) + 1) * h_c
        peak = np.max(np.abs(self._unit(grid)))
        self.scale = cfg.amplitude / peak if peak > 0 else 0.0

    def _unit(self, t):
        t = np.asarray(t, dtype=float)
        arg = 2.0 * np.pi * np.multiply.outer(t, self.freqs) + self.phases
        return np.sin(arg).sum(axis=-1)

    def __call__(self, t):
        out = self.scale * self._unit(t)
        return float(out) if np.ndim(out) == 0 else out


def multisine_signal(cfg: ExcitationConfig, t, h_c: float = 0.01, phases=None):
    return Multisine(cfg, h_c, phases)(t)


def generate_training_run(plant: PlantConfig, ex: ExcitationConfig,
                          pe0: float = 0.8, vt0: float = 1.0) -> TimeSeries:
    """Drive the plant open-loop with the multisine as stabilizer signal.

    Raises NumericalError if the speed leaves the +-0.02 p.u. band.
    """
    sig = Multisine(ex, plant.h_c)
    u = sig(np.arange(int(round(ex.duration / plant.h_c)) + 1) * plant.h_c)
    sim = Simulation(plant, pe0, vt0, (), ex.duration)
    ts = run_closed_loop(sim, lambda k, t, omega: float(u[k]))
    peak = float(np.max(np.abs(ts.dw)))
    if ts.truncated or peak >= BOUND_DW:
        raise NumericalError(
            f"plant left the +-{BOUND_DW} p.u. speed band under excitation "
            f"(peak {peak:.4f}); reduce excitation.amplitude")
    ts.meta.update(source="multisine", seed=ex.seed)
    return ts
