"""Conventional lead-lag stabilizer as a cascade of Tustin-discretized sections.

Structure: washout -> lead-lag 1 -> lead-lag 2 -> gain -> limiter.  All
linear blocks commute, so the gain is applied after the filters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class CpssParams:
    k_gain: float = 15.0
    tw: float = 10.0
    t1: float = 0.08
    t2: float = 0.02
    t3: float = 0.08
    t4: float = 0.02
    u_max: float = 0.1
    h_c: float = 0.01

    def __post_init__(self):
        for name in ("tw", "t1", "t2", "t3", "t4"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"cpss.{name} must be > 0")
        if not self.u_max > 0:
            raise ConfigError("cpss.u_max must be > 0")
        if not 0 < self.h_c < 2 * min(self.t2, self.t4):
            raise ConfigError("cpss.h_c must satisfy 0 < h_c < 2 * min(t2, t4)")


@dataclass(frozen=True)
class Section:
    """y[n] = b0 x[n] + b1 x[n-1] - a1 y[n-1]"""

    b0: float
    b1: float
    a1: float


@dataclass(frozen=True)
class CpssState:
    x_prev: float = 0.0   # previous stabilizer input sample
    y_wo: float = 0.0     # washout output memory
    y_ll1: float = 0.0
    y_ll2: float = 0.0


def tustin_first_order(num, den, h_c: float) -> Section:
    """Bilinear transform of (num[0] + num[1] s) / (den[0] + den[1] s)."""
    b0, b1 = num
    a0, a1 = den
    if not (a1 > 0 and h_c > 0 and math.isfinite(a0) and math.isfinite(a1)):
        raise ValueError(f"degenerate or unstable section denominator {den}")
    c = 2.0 / h_c
    d = a0 + a1 * c
    if d == 0:
        raise ValueError(f"degenerate section denominator {den}")
    return Section((b0 + b1 * c) / d, (b0 - b1 * c) / d, (a0 - a1 * c) / d)


def sections(params: CpssParams) -> tuple[Section, Section, Section]:
    h = params.h_c
    return (
        tustin_first_order((0.0, params.tw), (1.0, params.tw), h),
        tustin_first_order((1.0, params.t1), (1.0, params.t2), h),
        tustin_first_order((1.0, params.t3), (1.0, params.t4), h),
    )


def cpss_reset(params: CpssParams | None = None) -> CpssState:
    return CpssState()


def cpss_step(state: CpssState, params: CpssParams, d_omega: float,
              secs: tuple[Section, Section, Section] | None = None) -> tuple[CpssState, float]:
    """Advance one sample; returns the new state and the limited output.

    ``secs`` may carry precomputed sections to skip rediscretization.
    """
    wo, ll1, ll2 = secs if secs is not None else sections(params)
    y_wo = wo.b0 * d_omega + wo.b1 * state.x_prev - wo.a1 * state.y_wo
    y_ll1 = ll1.b0 * y_wo + ll1.b1 * state.y_wo - ll1.a1 * state.y_ll1
    y_ll2 = ll2.b0 * y_ll1 + ll2.b1 * state.y_ll1 - ll2.a1 * state.y_ll2
    u = params.k_gain * y_ll2
    u = min(max(u, -params.u_max), params.u_max)
    return CpssState(d_omega, y_wo, y_ll1, y_ll2), u


def frequency_response(sec: Section, f_hz: float, h_c: float) -> complex:
    """Section response on the unit circle at ``f_hz``."""
    zinv = np.exp(-2j * np.pi * f_hz * h_c)
    return complex((sec.b0 + sec.b1 * zinv) / (1.0 + sec.a1 * zinv))


class Cpss:
    """Stateful wrapper used by the closed-loop runner and the bridge server."""

    name = "cpss"

    def __init__(self, params: CpssParams | None = None):
        self.params = params or CpssParams()
        self._secs = sections(self.params)
        self.state = cpss_reset(self.params)

    def reset(self):
        self.state = cpss_reset(self.params)

    def step(self, d_omega: float) -> float:
        self.state, u = cpss_step(self.state, self.params, d_omega, self._secs)
        return u


class NoStabilizer:
    name = "none"

    def reset(self):
        pass

    def step(self, d_omega: float) -> float:
        return 0.0
