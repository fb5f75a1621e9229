"""Neural identifier: one-step-ahead rotor-speed predictor.

Input vector layout (fixed): ``[u(k), u(k-1), ..., s*dw(k), s*dw(k-1), ...]``
with stabilizer taps unscaled and speed-deviation taps multiplied by
``scale_w``.  The network output is ``s*dw(k+1)`` and the prediction in per
unit is ``1 + output / scale_w``.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ann import Mlp, backward, forward, layer_specs, mlp_init, sgd_update
from .errors import ConfigError, NumericalError
from .fmt import fmt_float
from .sim import PlantConfig, Simulation, TimeSeries, write_csv

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IdentifierConfig:
    n_u: int = 3
    n_w: int = 3
    hidden: tuple[int, ...] = (10,)
    scale_w: float = 100.0
    eta: float = 0.5
    epochs: int = 200
    batch: int = 32
    clip: float = 1.0
    seed: int = 0
    online: bool = False

    def __post_init__(self):
        if self.n_u < 1 or self.n_w < 1:
            raise ConfigError("identifier.n_u and identifier.n_w must be >= 1")
        if not self.scale_w > 0:
            raise ConfigError("identifier.scale_w must be > 0")
        if self.batch < 1 or self.epochs < 0:
            raise ConfigError("identifier.batch must be >= 1 and epochs >= 0")

    @property
    def n_inputs(self) -> int:
        return self.n_u + self.n_w

    @property
    def depth(self) -> int:
        return max(self.n_u, self.n_w)

    def columns(self) -> list[str]:
        def names(prefix, n):
            return [f"{prefix}_k" if i == 0 else f"{prefix}_k{i}" for i in range(n)]
        return names("u", self.n_u) + names("dw", self.n_w) + ["target_dw_next"]


class TappedDelays:
    """Newest-first delay lines of stabilizer signal and speed deviation (p.u.)."""

    def __init__(self, n_u: int, n_w: int):
        self.u = deque(maxlen=n_u)
        self.dw = deque(maxlen=n_w)

    @classmethod
    def for_config(cls, cfg: IdentifierConfig) -> "TappedDelays":
        return cls(cfg.n_u, cfg.n_w)

    def push(self, u: float, dw: float) -> None:
        self.u.appendleft(u)
        self.dw.appendleft(dw)

    @property
    def ready(self) -> bool:
        return len(self.u) == self.u.maxlen and len(self.dw) == self.dw.maxlen

    def vector(self, scale_w: float) -> np.ndarray:
        if not self.ready:
            raise ValueError("tapped delays not filled yet")
        return np.array([*self.u, *(scale_w * d for d in self.dw)])


@dataclass
class IdDataset:
    inputs: np.ndarray   # rows of network inputs
    targets: np.ndarray  # scale_w * dw(k+1)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.targets)

    def to_csv(self, path, cfg: IdentifierConfig) -> None:
        cols = [self.inputs[:, j] for j in range(self.inputs.shape[1])] + [self.targets]
        write_csv(path, cfg.columns(), cols)

    @classmethod
    def from_csv(cls, path, cfg: IdentifierConfig) -> "IdDataset":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if lines[0].split(",") != cfg.columns():
            raise ValueError(f"{path}: header does not match n_u={cfg.n_u}, n_w={cfg.n_w}")
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:] if ln])
        data = data.reshape(-1, cfg.n_inputs + 1)
        return cls(data[:, :-1].copy(), data[:, -1].copy(), {"source": str(path)})


@dataclass
class TrainReport:
    epoch_cost: list[float]
    rmse: float
    skipped_updates: int = 0

    def to_csv(self, path) -> None:
        lines = ["epoch,mean_cost"]
        lines += [f"{i},{fmt_float(c)}" for i, c in enumerate(self.epoch_cost)]
        lines.append(f"# final_rmse_scaled,{fmt_float(self.rmse)}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def build_dataset(run: TimeSeries, cfg: IdentifierConfig) -> IdDataset:
    """One row per tick k whose delay lines are full and whose successor exists."""
    n = len(run)
    if n <= cfg.n_u + cfg.n_w + 1:
        raise ValueError(f"run too short: {n} samples, need > {cfg.n_u + cfg.n_w + 1}")
    u = run["upss_pu"]
    dw = run["omega_pu"] - 1.0
    ks = np.arange(cfg.depth - 1, n - 1)
    cols = [u[ks - i] for i in range(cfg.n_u)]
    cols += [cfg.scale_w * dw[ks - i] for i in range(cfg.n_w)]
    X = np.column_stack(cols)
    y = cfg.scale_w * dw[ks + 1]
    return IdDataset(X, y, {"source": run.meta.get("source", "run"), "seed": run.meta.get("seed")})


def train_identifier(data: IdDataset, cfg: IdentifierConfig,
                     net: Mlp | None = None) -> tuple[Mlp, TrainReport]:
    """Mini-batch SGD on J = 1/2 (target - output)^2 in scaled units.

    Batches come from a PCG64(seed) permutation per epoch.  Raises
    NumericalError (with the partial report) if the epoch cost grows tenfold
    over five epochs.
    """
    if len(data) == 0:
        raise ValueError("empty identifier dataset")
    X, T = data.inputs, data.targets
    if net is None:
        net = mlp_init(layer_specs(cfg.n_inputs, cfg.hidden, 1), cfg.seed)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    costs: list[float] = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(len(T))
        total = 0.0
        for start in range(0, len(T), cfg.batch):
            idx = perm[start:start + cfg.batch]
            y, cache = forward(net, X[idx])
            err = y[:, 0] - T[idx]
            total += 0.5 * float(err @ err)
            grads = backward(net, cache, (err / len(idx))[:, None])
            net = sgd_update(net, grads, cfg.eta, cfg.clip)
        costs.append(total / len(T))
        if not math.isfinite(costs[-1]) or (epoch >= 5 and costs[-1] > 10.0 * costs[-6]):
            raise NumericalError(
                f"identifier training diverged at epoch {epoch}",
                report=TrainReport(costs, math.nan, net.skipped_updates))
    return net, TrainReport(costs, dataset_rmse(net, data), net.skipped_updates)


def dataset_rmse(net: Mlp, data: IdDataset) -> float:
    y, _ = forward(net, data.inputs)
    return float(np.sqrt(np.mean((y[:, 0] - data.targets) ** 2)))


def predict_one_step(ni: Mlp, taps: TappedDelays, cfg: IdentifierConfig) -> float:
    """Predicted speed (p.u.) one control period ahead."""
    y, _ = forward(ni, taps.vector(cfg.scale_w))
    return 1.0 + float(y[0]) / cfg.scale_w


@dataclass
class ValidationResult:
    rmse: float
    t: np.ndarray        # time of the predicted sample
    omega: np.ndarray
    omega_hat: np.ndarray
    baseline_rmse: float  # predictor pinned at 1 p.u.

    def to_csv(self, path) -> None:
        write_csv(path, ["t", "omega_pu", "omega_hat_pu"], [self.t, self.omega, self.omega_hat])


def validate_identifier(ni: Mlp, scenario, cfg: IdentifierConfig, stabilizer,
                        plant: PlantConfig | None = None) -> ValidationResult:
    """Run ``scenario`` closed-loop and score one-step predictions along the way.

    With ``cfg.online`` a copy of the identifier takes one SGD step on each
    (input, target) pair as soon as the target speed is observed; the
    prediction for that tick is scored before the update.
    """
    plant = plant or PlantConfig()
    sim = Simulation(plant, scenario.pe0, scenario.vt0, scenario.events, scenario.t_end)
    stabilizer.reset()
    taps = TappedDelays.for_config(cfg)
    net = ni.copy() if cfg.online else ni
    pending = None  # (prediction, input vector)
    ts, om, pred = [], [], []
    while not sim.done:
        omega = sim.omega
        if pending is not None:
            ts.append(sim.t)
            om.append(omega)
            pred.append(pending[0])
            if cfg.online:
                y, cache = forward(net, pending[1])
                err = float(y[0]) - cfg.scale_w * (omega - 1.0)
                net = sgd_update(net, backward(net, cache, np.array([err])), cfg.eta, cfg.clip)
        u = stabilizer.step(omega - 1.0)
        taps.push(u, omega - 1.0)
        if taps.ready:
            x = taps.vector(cfg.scale_w)
            y, _ = forward(net, x)
            pending = (1.0 + float(y[0]) / cfg.scale_w, x)
        sim.advance(u)
    om_a, pr_a = np.array(om), np.array(pred)
    rmse = float(np.sqrt(np.mean((om_a - pr_a) ** 2)))
    base = float(np.sqrt(np.mean((om_a - 1.0) ** 2)))
    return ValidationResult(rmse, np.array(ts), om_a, pr_a, base)
