"""Single machine connected to an infinite bus.

One-axis (flux-decay) synchronous machine with a first-order static exciter,
four states ``(delta, omega, eqp, efd)``, all in per unit except the rotor
angle (rad).  The hot path works on plain floats; the dataclasses are the
public surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, astuple, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, NumericalError
from .events import Event, Fault


@dataclass(frozen=True)
class GeneratorParams:
    h_inertia: float = 3.5
    d_damping: float = 4.5
    xd: float = 1.81
    xdp: float = 0.3
    xq: float = 1.76
    td0p: float = 8.0
    ka: float = 200.0
    ta: float = 0.02
    efd_min: float = -6.0
    efd_max: float = 6.0
    omega_base: float = 2.0 * math.pi * 50.0

    def __post_init__(self):
        checks = [
            (self.h_inertia > 0, "h_inertia > 0"),
            (self.td0p > 0, "td0p > 0"),
            (self.ta > 0, "ta > 0"),
            (0 < self.xdp < self.xd, "0 < xdp < xd"),
            (self.xq > 0, "xq > 0"),
            (self.efd_min < self.efd_max, "efd_min < efd_max"),
            (self.omega_base > 0, "omega_base > 0"),
        ]
        for ok, what in checks:
            if not ok:
                raise ConfigError(f"invalid generator parameters: need {what}")


@dataclass(frozen=True)
class NetworkParams:
    xe: float = 0.65
    v_inf: float = 1.0
    v_fault: float = 0.8

    def __post_init__(self):
        if not self.xe > 0:
            raise ConfigError("invalid network parameters: need xe > 0")
        if not self.v_inf > 0:
            raise ConfigError("invalid network parameters: need v_inf > 0")
        if not 0 <= self.v_fault < self.v_inf:
            raise ConfigError("invalid network parameters: need 0 <= v_fault < v_inf")


@dataclass(frozen=True)
class PlantState:
    delta: float
    omega: float
    eqp: float
    efd: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self))

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in astuple(self))


@dataclass(frozen=True)
class PlantInputs:
    pm: float
    vref: float
    upss: float = 0.0


@dataclass(frozen=True)
class AlgebraicOutputs:
    id_cur: float
    iq_cur: float
    pe: float
    vt: float


def _algebra(delta, eqp, v_bus, gp, xe):
    id_cur = (eqp - v_bus * math.cos(delta)) / (gp.xdp + xe)
    iq_cur = v_bus * math.sin(delta) / (gp.xq + xe)
    pe = eqp * iq_cur + (gp.xq - gp.xdp) * id_cur * iq_cur
    vq = eqp - gp.xdp * id_cur
    vd = gp.xq * iq_cur
    return id_cur, iq_cur, pe, math.hypot(vd, vq)


def _rates(x, pm, vref, upss, v_bus, gp, xe):
    delta, omega, eqp, efd = x
    id_cur, _, pe, vt = _algebra(delta, eqp, v_bus, gp, xe)
    d_delta = gp.omega_base * (omega - 1.0)
    d_omega = (pm - pe - gp.d_damping * (omega - 1.0)) / (2.0 * gp.h_inertia)
    d_eqp = (efd - eqp - (gp.xd - gp.xdp) * id_cur) / gp.td0p
    d_efd = (gp.ka * (vref - vt + upss) - efd) / gp.ta
    # anti-windup: hold the field voltage at a limit it is pushing against
    if (efd >= gp.efd_max and d_efd > 0) or (efd <= gp.efd_min and d_efd < 0):
        d_efd = 0.0
    return d_delta, d_omega, d_eqp, d_efd


def _check_finite(state: PlantState):
    if not state.is_finite():
        raise NumericalError(f"non-finite plant state {state}")


def algebraic_outputs(state: PlantState, gp: GeneratorParams, np_: NetworkParams,
                      v_bus: float) -> AlgebraicOutputs:
    """Stator currents, electrical power and terminal voltage for a given bus voltage."""
    if v_bus < 0:
        raise ValueError(f"bus voltage must be >= 0, got {v_bus}")
    _check_finite(state)
    return AlgebraicOutputs(*_algebra(state.delta, state.eqp, v_bus, gp, np_.xe))


def derivatives(state: PlantState, inputs: PlantInputs, gp: GeneratorParams,
                np_: NetworkParams, v_bus: float) -> PlantState:
    """Time derivatives of the four states, returned as a PlantState of rates."""
    _check_finite(state)
    if not all(math.isfinite(v) for v in astuple(inputs)):
        raise NumericalError(f"non-finite plant inputs {inputs}")
    return PlantState(*_rates(astuple(state), inputs.pm, inputs.vref, inputs.upss,
                              v_bus, gp, np_.xe))


def _rk4(x, pm, vref, upss, v_bus, gp, xe, h):
    k1 = _rates(x, pm, vref, upss, v_bus, gp, xe)
    x2 = tuple(xi + 0.5 * h * ki for xi, ki in zip(x, k1))
    k2 = _rates(x2, pm, vref, upss, v_bus, gp, xe)
    x3 = tuple(xi + 0.5 * h * ki for xi, ki in zip(x, k2))
    k3 = _rates(x3, pm, vref, upss, v_bus, gp, xe)
    x4 = tuple(xi + h * ki for xi, ki in zip(x, k3))
    k4 = _rates(x4, pm, vref, upss, v_bus, gp, xe)
    delta, omega, eqp, efd = (
        xi + h / 6.0 * (a + 2.0 * b + 2.0 * c + d)
        for xi, a, b, c, d in zip(x, k1, k2, k3, k4)
    )
    efd = min(max(efd, gp.efd_min), gp.efd_max)
    return delta, omega, eqp, efd


def rk4_step(state: PlantState, inputs: PlantInputs, gp: GeneratorParams,
             np_: NetworkParams, v_bus: float, h: float, t: float | None = None) -> PlantState:
    """One classical Runge-Kutta step with the field voltage clamped afterwards.

    ``t`` is only used to time-stamp the error raised on a non-finite result.
    """
    if not h > 0:
        raise ValueError(f"step size must be > 0, got {h}")
    out = PlantState(*_rk4(astuple(state), inputs.pm, inputs.vref, inputs.upss,
                           v_bus, gp, np_.xe, h))
    if not out.is_finite():
        raise NumericalError("integration produced a non-finite state", t=t)
    return out


def init_equilibrium(gp: GeneratorParams, np_: NetworkParams, pe0: float,
                     vt0: float, tol: float = 1e-10,
                     max_iter: int = 50) -> tuple[PlantState, PlantInputs]:
    """Steady state delivering ``pe0`` at terminal voltage ``vt0``.

    Newton iteration on (delta, eqp) from (0.5 rad, 1.0), Jacobian by central
    differences.  Raises NumericalError if the operating point is unreachable
    or needs a field voltage outside the exciter limits.
    """
    if not vt0 > 0:
        raise ValueError(f"terminal voltage must be > 0, got {vt0}")
    v = np_.v_inf
    xe = np_.xe

    def residual(z):
        _, _, pe, vt = _algebra(z[0], z[1], v, gp, xe)
        return np.array([pe - pe0, vt - vt0])

    z = np.array([0.5, 1.0])
    r = residual(z)
    eps = 1e-7
    converged = False
    for _ in range(max_iter):
        jac = np.empty((2, 2))
        for j in range(2):
            dz = np.zeros(2)
            dz[j] = eps
            jac[:, j] = (residual(z + dz) - residual(z - dz)) / (2 * eps)
        try:
            z = z - np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            break
        r = residual(z)
        if not np.all(np.isfinite(r)):
            break
        if np.linalg.norm(r) < tol:
            converged = True
            break
    if not converged:
        raise NumericalError(
            f"equilibrium Newton solve did not converge for pe0={pe0}, vt0={vt0}: "
            f"residual norm {np.linalg.norm(r):.3e}"
        )
    delta, eqp = float(z[0]), float(z[1])
    id_cur, _, _, _ = _algebra(delta, eqp, v, gp, xe)
    efd = eqp + (gp.xd - gp.xdp) * id_cur
    if not gp.efd_min <= efd <= gp.efd_max:
        raise NumericalError(
            f"infeasible operating point: field voltage {efd:.4f} outside "
            f"[{gp.efd_min}, {gp.efd_max}]"
        )
    state = PlantState(delta, 1.0, eqp, efd)
    inputs = PlantInputs(pm=pe0, vref=vt0 + efd / gp.ka, upss=0.0)
    return state, inputs


def bus_voltage(np_: NetworkParams, t: float, active_events: Sequence[Event]) -> float:
    """Infinite-bus voltage at time ``t``; a fault interval is [start, start + duration)."""
    for ev in active_events:
        if isinstance(ev, Fault) and ev.active(t):
            return np_.v_fault if ev.v_fault is None else ev.v_fault
    return np_.v_inf


def jacobian(state: PlantState, inputs: PlantInputs, gp: GeneratorParams,
             np_: NetworkParams, eps: float = 1e-6) -> np.ndarray:
    """4x4 state Jacobian by central differences around ``state`` at nominal bus voltage."""
    x0 = np.array(astuple(state))
    jac = np.empty((4, 4))
    for j in range(4):
        dx = np.zeros(4)
        dx[j] = eps
        fp = _rates(tuple(x0 + dx), inputs.pm, inputs.vref, inputs.upss, np_.v_inf, gp, np_.xe)
        fm = _rates(tuple(x0 - dx), inputs.pm, inputs.vref, inputs.upss, np_.v_inf, gp, np_.xe)
        jac[:, j] = (np.array(fp) - np.array(fm)) / (2 * eps)
    return jac


def dominant_mode(state: PlantState, inputs: PlantInputs, gp: GeneratorParams,
                  np_: NetworkParams) -> complex:
    """Least-damped oscillatory eigenvalue (positive imaginary part) of the linearization."""
    eig = np.linalg.eigvals(jacobian(state, inputs, gp, np_))
    osc = eig[eig.imag > 1e-6]
    if osc.size == 0:
        raise NumericalError("linearization has no oscillatory mode")
    return complex(osc[np.argmax(osc.real)])


def perturbed(state: PlantState, **changes) -> PlantState:
    return replace(state, **changes)
