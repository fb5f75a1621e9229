"""Neural controller trained by back-propagating the predicted speed error.

At every control tick the frozen identifier predicts the next speed from the
current delay lines, the cost ``J = 1/2 (s * (w_d - w_hat(k+1)))**2`` is
formed in scaled units, and its gradient with respect to the newest
stabilizer tap ``u(k)`` is read off the identifier's input gradient.  That
value, times ``d upss / d raw``, is the output error of the controller
network for one SGD step.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .ann import Mlp, backward, forward, layer_specs, mlp_init, sgd_update
from .errors import ConfigError, NumericalError
from .events import Fault
from .fmt import fmt_float
from .identifier import IdentifierConfig, TappedDelays
from .sim import PlantConfig, Simulation

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ControllerConfig:
    n_c: int = 3
    hidden: tuple[int, ...] = (8,)
    u_max: float = 0.1
    w_d: float = 1.0
    eta_c: float = 1e-3
    clip: float = 1.0
    episodes: int = 50
    seed: int = 0
    scale_w: float = 100.0
    use_u_taps: bool = False
    # randomized training episodes
    episode_t_end: float = 10.0
    pe0: float = 0.8
    fault_start: tuple[float, float] = (0.2, 1.0)
    fault_duration: tuple[float, float] = (0.1, 0.5)
    fault_v: tuple[float, float] = (0.7, 0.9)
    abort_dw: float = 0.1

    def __post_init__(self):
        if not self.u_max > 0:
            raise ConfigError("controller.u_max must be > 0")
        if self.n_c < 1:
            raise ConfigError("controller.n_c must be >= 1")
        if self.episodes < 0 or self.eta_c < 0:
            raise ConfigError("controller.episodes and controller.eta_c must be >= 0")

    @property
    def n_inputs(self) -> int:
        return 2 * self.n_c if self.use_u_taps else self.n_c


class ControllerTaps:
    """Newest-first speed-deviation taps (and optionally past outputs), zero-filled."""

    def __init__(self, cfg: ControllerConfig):
        self.cfg = cfg
        self.dw = deque([0.0] * cfg.n_c, maxlen=cfg.n_c)
        self.u = deque([0.0] * cfg.n_c, maxlen=cfg.n_c)

    def push_speed(self, dw: float) -> None:
        self.dw.appendleft(dw)

    def push_output(self, u: float) -> None:
        self.u.appendleft(u)

    def vector(self) -> np.ndarray:
        s = self.cfg.scale_w
        x = [s * d for d in self.dw]
        if self.cfg.use_u_taps:
            x += list(self.u)
        return np.array(x)


def new_controller(cfg: ControllerConfig) -> Mlp:
    return mlp_init(layer_specs(cfg.n_inputs, cfg.hidden, 1), cfg.seed)


def nc_output(nc: Mlp, taps: ControllerTaps, cfg: ControllerConfig):
    """Returns ``(upss, raw, cache)`` with ``upss = u_max * tanh(raw)``."""
    y, cache = forward(nc, taps.vector())
    raw = float(y[0])
    return cfg.u_max * math.tanh(raw), raw, cache


def prediction_cost(ni: Mlp, x: np.ndarray, cfg_id: IdentifierConfig, cfg_nc: ControllerConfig):
    """Scaled predicted-speed cost and the identifier forward cache for input ``x``."""
    y, cache = forward(ni, x)
    target = cfg_id.scale_w * (cfg_nc.w_d - 1.0)
    err = float(y[0]) - target
    return 0.5 * err * err, err, cache


def controller_input_error(ni: Mlp, taps: TappedDelays, cfg_id: IdentifierConfig,
                           cfg_nc: ControllerConfig) -> float:
    """dJ/du(k): the predicted-speed error carried back through the identifier."""
    if not taps.ready:
        raise ValueError("identifier taps not filled yet")
    _, err, cache = prediction_cost(ni, taps.vector(cfg_id.scale_w), cfg_id, cfg_nc)
    grads = backward(ni, cache, np.array([err]))
    return float(grads.input_grad[0])


class AnnStabilizer:
    """Trained controller network behind the ``reset()/step(d_omega)`` interface."""

    name = "annpss"

    def __init__(self, nc: Mlp, cfg: ControllerConfig | None = None):
        self.nc = nc
        self.cfg = cfg or ControllerConfig()
        if nc.n_inputs != self.cfg.n_inputs:
            raise ConfigError(
                f"controller weights take {nc.n_inputs} inputs, config expects {self.cfg.n_inputs}")
        self.reset()

    def reset(self):
        self.taps = ControllerTaps(self.cfg)

    def step(self, d_omega: float) -> float:
        self.taps.push_speed(d_omega)
        u, _, _ = nc_output(self.nc, self.taps, self.cfg)
        self.taps.push_output(u)
        return u


@dataclass
class EpisodeReport:
    episode: int
    itae: float
    peak_dw: float
    mean_cost: float
    aborted: bool = False
    eta: float = 0.0


def write_episode_reports(reports: Sequence[EpisodeReport], path) -> None:
    lines = ["episode,itae,peak_dw,mean_cost"]
    for r in reports:
        lines.append(f"{r.episode},{fmt_float(r.itae)},{fmt_float(r.peak_dw)},"
                     f"{fmt_float(r.mean_cost)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def random_fault_episode(plant: PlantConfig, cfg: ControllerConfig):
    """Episode factory: one fault with start, duration and depth drawn uniformly."""

    def make(rng: np.random.Generator) -> Simulation:
        fault = Fault(float(rng.uniform(*cfg.fault_start)),
                      float(rng.uniform(*cfg.fault_duration)),
                      float(rng.uniform(*cfg.fault_v)))
        sim = Simulation(plant, cfg.pe0, 1.0, (fault,), cfg.episode_t_end)
        sim.t_event = fault.t_start
        return sim

    return make


class _Diverged(Exception):
    pass


def _run_episode(nc, ni, cfg, cfg_id, env, eta, learn=True):
    taps = ControllerTaps(cfg)
    id_taps = TappedDelays.for_config(cfg_id)
    t_event = getattr(env, "t_event", 0.0)
    itae = peak = cost_sum = 0.0
    n_cost = 0
    h_c = getattr(env, "h_c", None) or env.plant.h_c
    while not env.done:
        dw = env.omega - 1.0
        if abs(dw) > cfg.abort_dw:
            raise _Diverged(env.t)
        if env.t >= t_event - 1e-9:
            itae += (env.t - t_event) * abs(dw) * h_c
            peak = max(peak, abs(dw))
        taps.push_speed(dw)
        x_nc = taps.vector()
        y, nc_cache = forward(nc, x_nc)
        raw = float(y[0])
        th = math.tanh(raw)
        u = cfg.u_max * th
        taps.push_output(u)
        id_taps.push(u, dw)
        if id_taps.ready:
            x_id = id_taps.vector(cfg_id.scale_w)
            j, err, id_cache = prediction_cost(ni, x_id, cfg_id, cfg)
            cost_sum += j
            n_cost += 1
            if learn and eta > 0:
                e_u = float(backward(ni, id_cache, np.array([err])).input_grad[0])
                out_err = e_u * cfg.u_max * (1.0 - th * th)
                nc = sgd_update(nc, backward(nc, nc_cache, np.array([out_err])), eta, cfg.clip)
        env.advance(u)
    if getattr(env, "lost_sync", False):
        raise _Diverged(env.t)
    return nc, itae, peak, cost_sum / max(n_cost, 1)


def train_controller(ni: Mlp, plant: PlantConfig | None = None,
                     cfg: ControllerConfig | None = None,
                     cfg_id: IdentifierConfig | None = None,
                     make_episode: Callable[[np.random.Generator], object] | None = None,
                     nc: Mlp | None = None) -> tuple[Mlp, list[EpisodeReport]]:
    """Closed-loop episodic training with the identifier frozen.

    ``make_episode(rng)`` returns a fresh plant exposing ``omega``, ``t``,
    ``done`` and ``advance(u)``; the default draws a random fault on the SMIB
    plant.  A diverging episode (speed deviation above ``abort_dw`` or loss of
    synchronism) is rolled back and the learning rate halved; three in a row
    raise NumericalError.
    """
    plant = plant or PlantConfig()
    cfg = cfg or ControllerConfig()
    cfg_id = cfg_id or IdentifierConfig()
    if ni.n_inputs != cfg_id.n_inputs:
        raise ConfigError("identifier weights do not match the identifier config")
    make_episode = make_episode or random_fault_episode(plant, cfg)
    nc = nc if nc is not None else new_controller(cfg)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    eta = cfg.eta_c
    reports: list[EpisodeReport] = []
    aborts = 0
    for ep in range(cfg.episodes):
        env = make_episode(rng)
        try:
            nc_new, itae, peak, mean_cost = _run_episode(nc, ni, cfg, cfg_id, env, eta)
        except _Diverged as exc:
            aborts += 1
            log.warning("episode %d diverged at t=%.3f s; rolling back, eta -> %g",
                        ep, exc.args[0], eta / 2)
            reports.append(EpisodeReport(ep, math.nan, math.nan, math.nan, True, eta))
            eta /= 2
            if aborts >= 3:
                raise NumericalError("controller training failed: three consecutive "
                                     "diverged episodes", report=reports) from None
            continue
        aborts = 0
        nc = nc_new
        reports.append(EpisodeReport(ep, itae, peak, mean_cost, False, eta))
    return nc, reports


class RecurrencePlant:
    """Toy plant dw(k+1) = a dw(k) + b u(k), exposing the episode interface."""

    def __init__(self, dw0: float, n_steps: int = 300, h_c: float = 0.01,
                 a: float = 0.9, b: float = 0.1):
        self.dw, self.k, self.n_steps, self.h_c, self.a, self.b = dw0, 0, n_steps, h_c, a, b
        self.t_event = 0.0
        self.trace: list[tuple[float, float]] = []

    @property
    def omega(self) -> float:
        return 1.0 + self.dw

    @property
    def t(self) -> float:
        return self.k * self.h_c

    @property
    def done(self) -> bool:
        return self.k > self.n_steps

    def advance(self, u: float) -> None:
        self.trace.append((self.dw, u))
        self.dw = self.a * self.dw + self.b * u
        self.k += 1
