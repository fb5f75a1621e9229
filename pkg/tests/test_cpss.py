import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import signal as sps

from swingbench.cpss import (Cpss, CpssParams, CpssState, NoStabilizer, cpss_reset, cpss_step,
                             frequency_response, sections, tustin_first_order)
from swingbench.errors import ConfigError


def run(params, xs):
    c = Cpss(params)
    return np.array([c.step(x) for x in xs])


def continuous_step(p: CpssParams, t):
    """Closed-form step response of the cascade by partial fractions."""
    num = p.k_gain * p.tw * np.polymul([p.t1, 1.0], [p.t3, 1.0])
    den = np.polymul(np.polymul([p.tw, 1.0], [p.t2, 1.0]), [p.t4, 1.0])
    res, poles, _ = sps.residue(num, den)
    y = np.zeros_like(t, dtype=complex)
    i = 0
    while i < len(poles):
        m = 1
        while i + m < len(poles) and abs(poles[i + m] - poles[i]) < 1e-6 * abs(poles[i]):
            m += 1
        for j in range(m):
            y += res[i + j] * t ** j / math.factorial(j) * np.exp(poles[i] * t)
        i += m
    return y.real


# discretization

def test_equal_lead_lag_is_identity():
    sec = tustin_first_order((1.0, 0.05), (1.0, 0.05), 0.01)
    assert sec.b0 == 1.0 and sec.b1 == sec.a1
    x = np.random.Generator(np.random.PCG64(3)).normal(size=50)
    y, xp, yp = [], 0.0, 0.0
    for v in x:
        yp = sec.b0 * v + sec.b1 * xp - sec.a1 * yp
        xp = v
        y.append(yp)
    np.testing.assert_allclose(y, x, atol=1e-14)


def test_washout_dc_gain_exactly_zero():
    wo = sections(CpssParams())[0]
    assert wo.b0 + wo.b1 == 0.0


def test_lead_lag_coefficients_hand_formula():
    sec = tustin_first_order((1.0, 0.08), (1.0, 0.02), 0.01)
    # c = 2/h = 200: (1 + 16)/(1 + 4), (1 - 16)/(1 + 4), (1 - 4)/(1 + 4)
    assert sec.b0 == pytest.approx(3.4, abs=1e-15)
    assert sec.b1 == pytest.approx(-3.0, abs=1e-15)
    assert sec.a1 == pytest.approx(-0.6, abs=1e-15)


def test_lead_lag_dc_gain_preserved():
    sec = tustin_first_order((1.0, 0.08), (1.0, 0.02), 0.01)
    assert frequency_response(sec, 0.0, 0.01) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("den", [(1.0, 0.0), (1.0, -0.1), (1.0, math.nan)])
def test_degenerate_denominator_rejected(den):
    with pytest.raises(ValueError):
        tustin_first_order((1.0, 0.1), den, 0.01)


# stepping

def test_zero_input_zero_output():
    assert np.all(run(CpssParams(), np.zeros(500)) == 0.0)


def test_washout_decay_under_constant_input():
    p, c = CpssParams(), 1e-3
    n = int(20 * p.tw / p.h_c)
    u = run(p, np.full(n, c))
    # first-order washout: residual fraction exp(-t/tw)
    at5 = abs(u[int(5 * p.tw / p.h_c) - 1]) / (p.k_gain * c)
    assert at5 == pytest.approx(math.exp(-5.0), rel=0.02)
    assert abs(u[-1]) < 1e-6 * p.k_gain * c


def test_step_response_matches_continuous_cascade():
    # Tustin samples a step as if it switched half a sample early; compare at the
    # midpoint-aligned instants with a fine sample period.
    p = CpssParams(h_c=1e-3, u_max=1e9)
    y = run(p, np.ones(3000))
    t = np.arange(len(y)) * p.h_c
    yc = continuous_step(p, t + 0.5 * p.h_c)
    assert np.max(np.abs(y - yc)) / np.max(np.abs(yc)) < 0.02


def test_reset_restores_zero_state():
    c = Cpss()
    for _ in range(30):
        c.step(1.0)
    c.reset()
    assert c.state == CpssState()
    assert cpss_reset() == cpss_reset(CpssParams())
    assert c.step(0.0) == 0.0


def test_reset_after_saturation_matches_fresh_instance():
    xs = np.sin(np.arange(200) * 0.1) * 1e-3
    c = Cpss()
    for _ in range(100):
        c.step(0.5)
    c.reset()
    np.testing.assert_array_equal([c.step(x) for x in xs], run(CpssParams(), xs))


def test_functional_and_class_interfaces_agree():
    p = CpssParams()
    xs = np.cos(np.arange(100) * 0.3) * 2e-3
    st_, out = cpss_reset(p), []
    for x in xs:
        st_, u = cpss_step(st_, p, x)
        out.append(u)
    np.testing.assert_array_equal(out, run(p, xs))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=1, max_size=200))
def test_output_bound(xs):
    p = CpssParams()
    assert np.all(np.abs(run(p, xs)) <= p.u_max)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=1, max_size=200), st.floats(-3.0, 3.0))
def test_linear_below_saturation(xs, a):
    p = CpssParams()
    # stay clear of the limiter: worst-case gain of the cascade is K * (T1/T2) * (T3/T4)
    x = np.array(xs) * p.u_max / (4.0 * p.k_gain * 16.0)
    np.testing.assert_allclose(run(p, a * x), a * run(p, x), rtol=0, atol=1e-12)


def test_phase_lead_at_one_hertz():
    p = CpssParams()
    _, ll1, ll2 = sections(p)
    h = frequency_response(ll1, 1.0, p.h_c) * frequency_response(ll2, 1.0, p.h_c)
    assert np.angle(h) > 0.0


def test_sampling_sanity_enforced():
    with pytest.raises(ConfigError):
        CpssParams(h_c=0.05)
    with pytest.raises(ConfigError):
        CpssParams(tw=0.0)


def test_no_stabilizer_outputs_zero():
    s = NoStabilizer()
    s.reset()
    assert s.step(0.3) == 0.0
