import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from warpcheck.kernel import cos_kappa, sigma, sigma_kappa, sin_kappa, tau

from conftest import rk4_oscillator


def test_sin_kappa_flat():
    assert sin_kappa(0.0, 2.5) == 2.5


def test_sin_kappa_round():
    assert abs(sin_kappa(1.0, math.pi / 2) - 1.0) < 1e-15


def test_sin_kappa_hyperbolic_against_rk4():
    ref = rk4_oscillator(-1.0, 1.0, 0.0, 1.0)
    assert abs(sin_kappa(-1.0, 1.0) - ref) < 1e-12
    assert abs(ref - 1.1752011936) < 1e-9


def test_cos_kappa_examples():
    assert cos_kappa(0.0, 7.0) == 1.0
    assert cos_kappa(1.0, 0.0) == 1.0
    ref = rk4_oscillator(-1.0, 1.0, 1.0, 0.0)
    assert abs(cos_kappa(-1.0, 1.0) - ref) < 1e-12
    assert abs(ref - 1.5430806348) < 1e-9


def test_sigma_examples():
    assert sigma(5, 2, 0.3, 0.0) == 0.3
    assert sigma(0, 3, 0.7, 2.0) == 0.7
    assert abs(sigma(2, 2, 0.5, math.pi / 2) - math.sqrt(2) / 2) < 1e-15


def test_tau_examples():
    assert tau(-3, 1, 0.4, 1.0) == 0.4
    assert np.isinf(tau(2, 1, 0.4, 1.0))
    assert tau(0, 4, 0.5, 3.0) == 0.5


def test_sigma_blows_up_at_conjugate_distance():
    assert np.isinf(sigma_kappa(1.0, 0.5, math.pi))
    assert np.isinf(sigma_kappa(1.0, 0.5, 4.0))
    assert np.isfinite(sigma_kappa(1.0, 0.5, math.pi - 1e-6))


def test_broadcasting():
    out = sin_kappa(np.array([-1.0, 0.0, 1.0]), 1.0)
    assert out.shape == (3,)
    assert np.allclose(out, [math.sinh(1), 1.0, math.sin(1)], rtol=0, atol=1e-15)


def test_invalid_dimension():
    with pytest.raises(ValueError):
        sigma(1.0, 0.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        tau(1.0, 0.5, 0.5, 1.0)


kappas = st.floats(-4.0, 4.0, allow_nan=False)


@given(kappas, st.floats(0.05, 1.4))
def test_ode_residual(kappa, s):
    # fourth-order central difference of u'' at s
    h = 1e-2
    pts = s + h * np.arange(-2, 3)
    u = sin_kappa(kappa, pts)
    d2 = (-u[0] + 16 * u[1] - 30 * u[2] + 16 * u[3] - u[4]) / (12 * h * h)
    assert abs(d2 + kappa * u[2]) < 1e-8 * max(1.0, abs(u[2]))


@given(kappas, st.floats(0.0, 1.5), st.floats(0.25, 4.0))
def test_scaling_law(kappa, s, lam):
    lhs = sin_kappa(kappa, s)
    rhs = lam * sin_kappa(lam * lam * kappa, s / lam)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


@given(st.floats(-5.0, 5.0), st.floats(1.5, 6.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_monotone_in_t(K, N, theta_frac, t):
    # sin_k(t theta) only increases in t while sqrt(k) theta <= pi/2
    kap = K / (N - 1)
    limit = math.pi / 2 / math.sqrt(kap) if kap > 0 else 3.0
    theta = theta_frac * min(limit, 3.0)
    t2 = min(1.0, t + 0.1)
    assert sigma(K, N, t2, theta) >= sigma(K, N, t, theta) - 1e-12
    assert tau(K, N, t2, theta) >= tau(K, N, t, theta) - 1e-12


def test_not_monotone_past_quarter_period():
    theta = 0.9 * math.pi
    assert sigma_kappa(1.0, 0.9, theta) < sigma_kappa(1.0, 0.5, theta)


def test_tau_infinite_at_t_zero_past_conjugate_distance():
    assert np.isinf(tau(2.0, 2.0, 0.0, 3.0))


@given(st.floats(0.0, 5.0), st.floats(1.0, 6.0), st.floats(0.01, 0.99), st.floats(0.0, 1.0))
def test_sigma_pair_sum(K, N, frac, t):
    theta = frac * (math.pi * math.sqrt(N / K) if K > 0 else 5.0)
    assert sigma(K, N, t, theta) + sigma(K, N, 1 - t, theta) >= 1 - 1e-12


@given(st.floats(0.0, 1.0), st.floats(0.1, 3.0), st.floats(1.0, 5.0))
def test_continuity_at_zero_curvature(t, theta, N):
    errs = [abs(sigma(s * k, N, t, theta) - t) for k in (1e-2, 1e-4, 1e-6, 1e-9) for s in (1, -1)]
    assert errs[-1] < 1e-9 and errs[-2] < 1e-9
    assert max(errs[-4:]) <= max(errs[:2]) + 1e-15


@given(st.floats(-3.0, 3.0), st.floats(0.0, 1.0), st.floats(0.0, 2.0))
def test_series_branch_matches_closed_form(kappa, t, theta):
    # just past the series cutoff the closed form is still accurate enough to compare
    z = kappa * theta * theta
    if abs(z) < 1e-6 or z >= math.pi ** 2:
        return
    s = sigma_kappa(kappa, t, theta)
    k = abs(kappa) ** 0.5
    trig = (math.sin, math.sinh)[kappa < 0]
    assert abs(s - trig(k * t * theta) / trig(k * theta)) < 1e-12
