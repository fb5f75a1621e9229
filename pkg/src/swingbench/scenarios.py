"""Evaluation scenarios, scenario runner and damping metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .events import Event, Fault, LoadStep, check_events
from .fmt import fmt_float
from .sim import PlantConfig, Simulation, TimeSeries, run_closed_loop, write_csv

SETTLING_BAND = 2e-4


@dataclass(frozen=True)
class Scenario:
    name: str
    pe0: float = 0.8
    vt0: float = 1.0
    events: tuple[Event, ...] = ()
    t_end: float = 15.0

    def __post_init__(self):
        check_events(self.events)
        if self.events:
            last = max(ev.t_end for ev in self.events)
            if self.t_end < last + 2.0:
                raise ConfigError(
                    f"scenario {self.name}: t_end must exceed the last event by >= 2 s")

    @property
    def t_event(self) -> float:
        """Time of the first disturbance (0 for an event-free scenario)."""
        return self.events[0].t if self.events else 0.0


def builtin_scenarios() -> dict[str, Scenario]:
    s1 = Scenario("S1", 0.8, 1.0, (Fault(0.2, 0.5), LoadStep(8.0, 0.10)), 15.0)
    return {
        "S1": s1,
        "S2": Scenario("S2", 0.8, 1.0, (Fault(0.2, 1.0),), 15.0),
        "S3": Scenario("S3", 1.0, 1.0, (Fault(0.2, 0.5),), 15.0),
        "V": Scenario("V", s1.pe0, s1.vt0, s1.events, s1.t_end),
    }


def get_scenario(name: str) -> Scenario:
    try:
        return builtin_scenarios()[name]
    except KeyError:
        raise ConfigError(
            f"unknown scenario {name!r}; choose from {sorted(builtin_scenarios())}") from None


def local_policy(stabilizer):
    """Wrap an object with ``step(d_omega)`` as a closed-loop policy."""
    stabilizer.reset()
    return lambda k, t, omega: stabilizer.step(omega - 1.0)


def run_scenario(scenario: Scenario, stabilizer, plant: PlantConfig | None = None) -> TimeSeries:
    """Simulate ``scenario`` from equilibrium with the given stabilizer.

    ``stabilizer`` is any object with ``reset()`` and ``step(d_omega)``
    (see :mod:`swingbench.cpss` and :mod:`swingbench.controller`).  Loss of
    synchronism truncates the trace and sets ``truncated``.
    """
    plant = plant or PlantConfig()
    sim = Simulation(plant, scenario.pe0, scenario.vt0, scenario.events, scenario.t_end)
    ts = run_closed_loop(sim, local_policy(stabilizer))
    ts.meta.update(scenario=scenario.name, stabilizer=getattr(stabilizer, "name", "custom"))
    return ts


@dataclass(frozen=True)
class Metrics:
    peak_dw: float
    settling_time: float
    itae: float
    settled: bool


def compute_metrics(ts: TimeSeries, t_event: float, band: float = SETTLING_BAND) -> Metrics:
    """Peak speed deviation, settling time into ``band`` and ITAE after ``t_event``.

    An unsettled response (still outside the band at the last sample, or a
    truncated trace) reports ``settling_time = inf`` and ``settled = False``.
    """
    t = ts.t
    if len(t) == 0 or t_event > t[-1] + 1e-12 or t_event < t[0] - 1e-12:
        raise ValueError(f"event time {t_event} outside the recorded trace")
    dw = np.abs(ts["omega_pu"] - 1.0)
    after = t >= t_event - 1e-9
    tt, ee = t[after], dw[after]
    peak = float(ee.max()) if ee.size else 0.0
    itae = float(np.sum((tt - t_event) * ee) * ts.h_c)
    outside = np.nonzero(ee > band)[0]
    if ts.truncated or (outside.size and outside[-1] == ee.size - 1):
        return Metrics(peak, math.inf, itae, False)
    if outside.size == 0:
        settling = 0.0
    else:
        settling = float(tt[outside[-1] + 1] - t_event)
    return Metrics(peak, max(settling, 0.0), itae, True)


REPORT_HEADER = "scenario,stabilizer,peak_dw,settling_time_s,itae,settled"
PAIRED_COLUMNS = ("t", "omega_cpss", "omega_annpss", "upss_cpss", "upss_annpss")


@dataclass
class CompareResult:
    scenario: Scenario
    metrics: dict[str, Metrics]
    traces: dict[str, TimeSeries] = field(default_factory=dict)

    def rows(self) -> list[tuple]:
        return [(self.scenario.name, name, m.peak_dw, m.settling_time, m.itae, m.settled)
                for name, m in self.metrics.items()]

    def ranking(self) -> list[str]:
        return sorted(self.metrics, key=lambda n: (self.metrics[n].settling_time,
                                                   self.metrics[n].itae))

    def paired(self) -> dict[str, np.ndarray]:
        a, b = self.traces["cpss"], self.traces["annpss"]
        n = max(len(a), len(b))
        t = np.arange(n) * a.h_c

        def pad(x):
            return np.concatenate([x, np.full(n - len(x), np.nan)])

        return dict(zip(PAIRED_COLUMNS, (t, pad(a["omega_pu"]), pad(b["omega_pu"]),
                                         pad(a["upss_pu"]), pad(b["upss_pu"]))))

    def write(self, report_path=None, paired_path=None) -> None:
        if report_path is not None:
            lines = [REPORT_HEADER]
            for sc, name, peak, settle, itae, ok in self.rows():
                lines.append(",".join([sc, name, fmt_float(peak), fmt_float(settle),
                                       fmt_float(itae), str(ok).lower()]))
            Path(report_path).write_text("\n".join(lines) + "\n", encoding="utf-8",
                                         newline="\n")
        if paired_path is not None:
            p = self.paired()
            write_csv(paired_path, list(p), list(p.values()))


def compare_report(scenario: Scenario, cpss_stab, ann_stab,
                   plant: PlantConfig | None = None) -> CompareResult:
    """Run the same scenario with the conventional and the neural stabilizer."""
    metrics, traces = {}, {}
    for name, stab in (("cpss", cpss_stab), ("annpss", ann_stab)):
        ts = run_scenario(scenario, stab, plant)
        traces[name] = ts
        metrics[name] = compute_metrics(ts, scenario.t_event)
    return CompareResult(scenario, metrics, traces)


def parse_events(faults: str = "", load_steps: str = "") -> tuple[Event, ...]:
    """Parse ``"0.2:0.5[:v_fault], ..."`` and ``"8.0:0.1, ..."`` override strings."""
    events: list[Event] = []
    for item in filter(None, (s.strip() for s in faults.split(","))):
        parts = [float(p) for p in item.split(":")]
        if len(parts) not in (2, 3):
            raise ConfigError(f"bad fault spec {item!r}; expected start:duration[:v_fault]")
        events.append(Fault(*parts))
    for item in filter(None, (s.strip() for s in load_steps.split(","))):
        parts = [float(p) for p in item.split(":")]
        if len(parts) != 2:
            raise ConfigError(f"bad load step spec {item!r}; expected time:fraction")
        events.append(LoadStep(*parts))
    return tuple(sorted(events, key=lambda ev: ev.t))
