"""Small feedforward network with exact reverse-mode gradients.

Both the identifier and the controller are instances of :class:`Mlp`: tanh
hidden layers and a linear output layer.  ``backward`` also returns the
gradient with respect to the network input, which is what carries the
prediction error from the identifier back to the controller output.

Randomness comes from NumPy's PCG64 bit generator (``numpy.random.PCG64``)
seeded with the caller's integer seed, so initial weights are reproducible
across platforms.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .fmt import fmt_float

log = logging.getLogger(__name__)

ACTIVATIONS = ("tanh", "linear")


class WeightsFormatError(ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class LayerSpec:
    fan_in: int
    fan_out: int
    activation: str = "tanh"

    def __post_init__(self):
        if self.fan_in < 1 or self.fan_out < 1:
            raise ValueError(f"layer dimensions must be >= 1, got {self.fan_in}x{self.fan_out}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class Mlp:
    layers: list[LayerSpec]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    skipped_updates: int = 0

    def __post_init__(self):
        _check_chain(self.layers)
        for spec, w, b in zip(self.layers, self.weights, self.biases, strict=True):
            if w.shape != (spec.fan_out, spec.fan_in) or b.shape != (spec.fan_out,):
                raise ValueError(
                    f"parameter shapes {w.shape}/{b.shape} do not match layer {spec}"
                )

    @property
    def n_inputs(self) -> int:
        return self.layers[0].fan_in

    @property
    def n_outputs(self) -> int:
        return self.layers[-1].fan_out

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def copy(self) -> "Mlp":
        return Mlp(list(self.layers), [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases], self.skipped_updates)

    def same_parameters(self, other: "Mlp") -> bool:
        return self.layers == other.layers and all(
            np.array_equal(a, b) for a, b in zip(self.params(), other.params())
        )


@dataclass
class GradientBundle:
    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]
    input_grad: np.ndarray

    def norm(self) -> float:
        return math.sqrt(sum(float(np.sum(g * g)) for g in (*self.weight_grads, *self.bias_grads)))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for g in (*self.weight_grads, *self.bias_grads))


@dataclass
class ForwardCache:
    inputs: list[np.ndarray] = field(default_factory=list)   # input to each layer
    outputs: list[np.ndarray] = field(default_factory=list)  # activation of each layer


def _check_chain(specs: Sequence[LayerSpec]):
    if not specs:
        raise ValueError("network needs at least one layer")
    for a, b in zip(specs, specs[1:]):
        if a.fan_out != b.fan_in:
            raise ValueError(f"layer dimensions do not chain: {a.fan_out} -> {b.fan_in}")


def layer_specs(n_in: int, hidden: Sequence[int], n_out: int = 1) -> list[LayerSpec]:
    """tanh hidden layers followed by a linear output layer."""
    sizes = [n_in, *hidden, n_out]
    acts = ["tanh"] * len(hidden) + ["linear"]
    return [LayerSpec(a, b, act) for a, b, act in zip(sizes, sizes[1:], acts)]


def mlp_init(specs: Sequence[LayerSpec], seed: int) -> Mlp:
    """Glorot-uniform weights from PCG64(seed), zero biases."""
    specs = list(specs)
    _check_chain(specs)
    rng = np.random.Generator(np.random.PCG64(seed))
    weights, biases = [], []
    for s in specs:
        bound = math.sqrt(6.0 / (s.fan_in + s.fan_out))
        weights.append(rng.uniform(-bound, bound, size=(s.fan_out, s.fan_in)))
        biases.append(np.zeros(s.fan_out))
    return Mlp(specs, weights, biases)


def forward(net: Mlp, x) -> tuple[np.ndarray, ForwardCache]:
    """Evaluate the network on one input vector or on a batch (rows are samples)."""
    a = np.asarray(x, dtype=float)
    if a.shape[-1] != net.n_inputs or a.ndim > 2:
        raise ValueError(f"input shape {a.shape} does not match fan_in {net.n_inputs}")
    cache = ForwardCache()
    for spec, w, b in zip(net.layers, net.weights, net.biases):
        cache.inputs.append(a)
        z = a @ w.T + b
        a = np.tanh(z) if spec.activation == "tanh" else z
        cache.outputs.append(a)
    return a, cache


def backward(net: Mlp, cache: ForwardCache, output_error) -> GradientBundle:
    """Gradients of a cost J given ``output_error`` = dJ/d(output).

    For a batch, parameter gradients are summed over rows and ``input_grad``
    keeps one row per sample.
    """
    delta = np.asarray(output_error, dtype=float)
    if delta.shape != cache.outputs[-1].shape:
        raise ValueError(
            f"output error shape {delta.shape} does not match output {cache.outputs[-1].shape}"
        )
    n = len(net.layers)
    wg: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    bg: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for i in reversed(range(n)):
        if net.layers[i].activation == "tanh":
            delta = delta * (1.0 - cache.outputs[i] ** 2)
        x = cache.inputs[i]
        if delta.ndim == 1:
            wg[i] = np.outer(delta, x)
            bg[i] = delta.copy()
        else:
            wg[i] = delta.T @ x
            bg[i] = delta.sum(axis=0)
        delta = delta @ net.weights[i]
    return GradientBundle(wg, bg, delta)


def sgd_update(net: Mlp, grads: GradientBundle, eta: float, clip: float = 1.0) -> Mlp:
    """Plain SGD step with global gradient-norm clipping; returns a new network.

    Non-finite gradients skip the update; the count is carried in
    ``skipped_updates``.
    """
    if not eta >= 0:
        raise ValueError(f"learning rate must be >= 0, got {eta}")
    if not grads.is_finite():
        log.warning("non-finite gradient, update skipped")
        out = net.copy()
        out.skipped_updates += 1
        return out
    scale = eta
    norm = grads.norm()
    if norm > clip:
        scale = eta * clip / norm
    return Mlp(
        list(net.layers),
        [w - scale * g for w, g in zip(net.weights, grads.weight_grads)],
        [b - scale * g for b, g in zip(net.biases, grads.bias_grads)],
        net.skipped_updates,
    )


def save_weights(net: Mlp, path) -> None:
    lines = [f"MLPV1 {len(net.layers)}"]
    for spec, w, b in zip(net.layers, net.weights, net.biases):
        lines.append(f"LAYER {spec.fan_in} {spec.fan_out} {spec.activation}")
        for row, bias in zip(w, b):
            lines.append(" ".join(fmt_float(v) for v in (*row, bias)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_weights(path) -> Mlp:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise WeightsFormatError("unexpected end of file", pos + 1)
        pos += 1
        return lines[pos - 1].split()

    head = take()
    if len(head) != 2 or head[0] != "MLPV1":
        raise WeightsFormatError("expected header 'MLPV1 <n_layers>'", 1)
    try:
        n_layers = int(head[1])
    except ValueError:
        raise WeightsFormatError(f"bad layer count {head[1]!r}", 1) from None
    specs, weights, biases = [], [], []
    for _ in range(n_layers):
        tok = take()
        if len(tok) != 4 or tok[0] != "LAYER":
            raise WeightsFormatError("expected 'LAYER <fan_in> <fan_out> <activation>'", pos)
        try:
            spec = LayerSpec(int(tok[1]), int(tok[2]), tok[3])
        except ValueError as exc:
            raise WeightsFormatError(str(exc), pos) from None
        w = np.empty((spec.fan_out, spec.fan_in))
        b = np.empty(spec.fan_out)
        for r in range(spec.fan_out):
            tok = take()
            if len(tok) != spec.fan_in + 1:
                raise WeightsFormatError(
                    f"expected {spec.fan_in + 1} values, got {len(tok)}", pos)
            try:
                vals = [float(v) for v in tok]
            except ValueError as exc:
                raise WeightsFormatError(str(exc), pos) from None
            w[r] = vals[:-1]
            b[r] = vals[-1]
        specs.append(spec)
        weights.append(w)
        biases.append(b)
    if pos != len(lines):
        raise WeightsFormatError("trailing content after last layer", pos + 1)
    try:
        return Mlp(specs, weights, biases)
    except ValueError as exc:
        raise WeightsFormatError(str(exc)) from None
