import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import default_grid
from morsewigner.grid import locate_peak
from morsewigner.spectrum import MorseParams, PhasePoint, wavefunction
from morsewigner.wigner import (ComplexOrder, extremum_closed_form, extremum_positions, knu_axis, knu_oracle,
                                knu_series, re_knu_scaled, wdf, wdf_marginal_position, wdf_values)


def mp_re_k(N, k, xi):
    """Re K_{N + 2ik}(xi) from mpmath's arbitrary-precision Bessel K."""
    with mpmath.workdps(30):
        return float(mpmath.re(mpmath.besselk(mpmath.mpc(N, 2 * k), xi)))


def close(a, b):
    return abs(a - b) <= max(1e-8, 1e-6 * abs(b))


# ---------------------------------------------------------------- K series


def test_series_matches_oracle_point():
    o = ComplexOrder(0, 0.5)
    assert abs(knu_series(o, 2.0).re_k - knu_oracle(o, 2.0)) < 1e-8


@pytest.mark.parametrize("N", [0, 1, 2, 3])
@pytest.mark.parametrize("xi", [0.1, 1.0, 5.0, 20.0])
@pytest.mark.parametrize("k", [0.01, 0.5, 5.0])
def test_series_matches_mpmath(N, xi, k):
    assert close(knu_series(ComplexOrder(N, k), xi).re_k, mp_re_k(N, k, xi))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 4), st.floats(0.05, 30.0), st.floats(0.005, 8.0))
def test_series_matches_mpmath_random(N, xi, k):
    assert close(knu_series(ComplexOrder(N, k), xi).re_k, mp_re_k(N, k, xi))


def test_result_fields():
    r = knu_series(ComplexOrder(2, 1.3), 0.7)
    assert r.est_err >= 0 and r.terms_used >= 1


@pytest.mark.parametrize("tol", [0.0, -1e-6, 1e-2])
def test_series_rejects_tolerance(tol):
    with pytest.raises(ValueError):
        knu_series(ComplexOrder(0, 1.0), 1.0, tol=tol)


def test_zero_momentum_routes_to_axis():
    assert knu_series(ComplexOrder(0, 0.0), 1.0).re_k == knu_axis(0, 1.0)
    assert abs(knu_series(ComplexOrder(0, 1e-8), 1.0).re_k - knu_axis(0, 1.0)) < 1e-6


def test_axis_against_bessel():
    for N, xi in [(0, 1.0), (1, 1.0), (3, 0.2), (2, 15.0)]:
        ref = float(mpmath.besselk(N, xi))
        assert knu_axis(N, xi) == pytest.approx(ref, rel=1e-10)
    assert knu_axis(1, 1.0) > knu_axis(0, 1.0)
    for xi in (50.0, 200.0, 600.0):
        ratio = knu_axis(0, xi) / (math.sqrt(math.pi / (2 * xi)) * math.exp(-xi))
        assert abs(ratio - 1.0) < 1.0 / (7.0 * xi)


def test_oracle_symmetries():
    for N, k, xi in [(1, 0.4, 1.0), (2, 2.0, 3.0), (3, 0.05, 0.5)]:
        a = knu_oracle(ComplexOrder(N, k), xi)
        assert abs(knu_oracle(ComplexOrder(N, -k), xi) - a) < 1e-10
        assert abs(knu_oracle(ComplexOrder(-N, k), xi) - a) < 1e-10
    assert abs(knu_oracle(ComplexOrder(0, 0.0), 1.0) - knu_axis(0, 1.0)) < 1e-10
    value, ok = knu_oracle(ComplexOrder(1, 1.0), 2.0, return_flag=True)
    assert ok and math.isfinite(value)


def test_scaled_vectorized_matches_scalar():
    k = np.array([0.0, 0.03, 0.7, 4.0])
    xi = np.array([0.3, 2.0, 9.0, 1.0])
    v, err, terms = re_knu_scaled(2, k, xi)
    for i in range(k.size):
        assert v[i] * math.exp(-xi[i]) == pytest.approx(knu_series(ComplexOrder(2, k[i]), xi[i]).re_k, rel=1e-12,
                                                        abs=1e-300)
    assert np.all(err >= 0) and np.all(terms >= 1)


# ---------------------------------------------------------------- extrema


def test_extremum_n1():
    y = extremum_positions(1, 0.5)
    assert y == pytest.approx([2.0])
    k = 0.8
    assert 2 * k * math.acosh(y[0]) == pytest.approx(2 * k * math.acosh(2.0))
    assert extremum_closed_form(1, 0.5) == pytest.approx(2.0)


@pytest.mark.parametrize("xi", [0.05, 0.3, 1.0, 3.0, 10.0])
def test_extremum_n2_closed_form(xi):
    """The stationary point of -xi cosh(u) + log cosh(2u) solves -xi sinh u + 2 tanh 2u = 0."""
    y = extremum_closed_form(2, xi)
    assert y == pytest.approx(1.0 / xi + math.sqrt(1.0 / xi ** 2 + 0.5), rel=1e-14)
    if y < 1.0:  # no interior extremum: the integrand peaks at u = 0
        assert not np.any(extremum_positions(2, xi) > 1.0 + 1e-12)
        return
    u = math.acosh(y)
    assert -xi * math.sinh(u) + 2.0 * math.tanh(2.0 * u) == pytest.approx(0.0, abs=1e-12)
    assert y == pytest.approx(max(extremum_positions(2, xi)), rel=1e-12)


@given(st.integers(1, 6), st.floats(0.02, 40.0))
def test_extremum_roots_are_stationary(N, xi):
    for y in extremum_positions(N, xi):
        assert y >= 1.0
        u = math.acosh(y)
        if u > 1e-6:
            assert -xi * math.sinh(u) + N * math.tanh(N * u) == pytest.approx(0.0, abs=1e-7 * max(1.0, xi * y))


# ---------------------------------------------------------------- Wigner function


def test_wdf_sample_real():
    s = wdf(MorseParams(2.0), 0, PhasePoint(0.3, 1.1))
    assert isinstance(s.rho, float) and math.isfinite(s.rho)


@pytest.mark.parametrize("lam, n", [(1.0, 0), (4.0, 2), (10.0, 5)])
def test_wdf_even_in_momentum(lam, n):
    rng = np.random.default_rng(3)
    q = rng.uniform(-1, 4, 40)
    p = rng.uniform(0, 3 * math.sqrt(lam), 40)
    params = MorseParams(lam)
    assert np.max(np.abs(wdf_values(params, n, q, p) - wdf_values(params, n, q, -p))) < 1e-10


@pytest.mark.parametrize("lam, n", [(4.0, 2), (10.0, 3)])
def test_symmetrized_assembly(lam, n):
    params = MorseParams(lam)
    q = np.linspace(-0.5, 3.0, 15)[:, None]
    p = np.linspace(0.0, 8.0, 9)[None, :]
    a = wdf_values(params, n, q, p, symmetrize=True)
    b = wdf_values(params, n, q, p, symmetrize=False)
    assert np.max(np.abs(a - b)) < 1e-12


def test_ground_state_closed_form():
    """For n = 0 the assembly collapses to (2/pi) xi^(2 lam - 1) Re K_{2ik}(xi) / Gamma(2 lam - 1)."""
    lam = 2.5
    params = MorseParams(lam)
    for q, p in [(0.0, 0.0), (0.4, 1.2), (-0.3, 2.5)]:
        xi = 2 * lam * math.exp(-q)
        ref = 2 / math.pi * xi ** (2 * lam - 1) / math.gamma(2 * lam - 1) * mp_re_k(0, p, xi)
        assert wdf_values(params, 0, q, p) == pytest.approx(ref, rel=1e-8, abs=1e-13)


def test_position_marginal_point():
    params = MorseParams(2.0)
    marg = wdf_marginal_position(params, 0, 0.0, 12.0, 0.02)
    assert abs(marg - wavefunction(params, 0, 0.0) ** 2) < 1e-4


def test_position_marginal_normalized():
    params = MorseParams(2.0)
    q = np.linspace(-2.5, 16.0, 741)
    marg = wdf_marginal_position(params, 0, q, 12.0, 0.03)
    assert abs(np.trapezoid(marg, q) - 1.0) < 1e-4


def test_position_marginal_tails():
    for lam in (1.0, 2.0, 4.0, 10.0):
        s = math.sqrt(lam)
        assert abs(wdf_marginal_position(MorseParams(lam), 0, -6.0 / s, 12.0, 0.05)) < 1e-6
    # the dissociation side decays only like exp(-(2 lam - 1) q): small at Q = 6 once lam is large
    assert abs(wdf_marginal_position(MorseParams(10.0), 0, 6.0 / math.sqrt(10.0), 25.0, 0.05)) < 1e-6


def test_marginal_cutoff_warning():
    with pytest.warns(RuntimeWarning, match="cutoff"):
        wdf_marginal_position(MorseParams(2.0), 0, 0.0, 1.0, 0.05)


@pytest.mark.slow
def test_minimum_orders():
    assert -3e-2 <= default_grid("wdf", 1.0).values.min() <= -3e-3
    assert -3e-4 <= default_grid("wdf", 4.0).values.min() <= -3e-5


@pytest.mark.slow
def test_peak_on_momentum_axis_lam10():
    g = default_grid("wdf", 10.0)
    Q, P, _ = locate_peak(g)
    assert abs(Q - 0.3) <= 0.1 and abs(P) < 0.05


@pytest.mark.slow
def test_harmonic_limit_lam10():
    g = default_grid("wdf", 10.0)
    Q0, _, _ = locate_peak(g)
    Qm, Pm = g.mesh()
    disk = Qm ** 2 + Pm ** 2 <= 1.0
    gauss = np.exp(-(Qm - Q0) ** 2 - Pm ** 2) / math.pi
    assert np.max(np.abs(g.values - gauss)[disk]) < 0.05 / math.pi


def test_sign_violation_falls_back(monkeypatch):
    import morsewigner.wigner as w

    real = w._series_block

    def broken(*a, **kw):
        v, e, t, ok = real(*a, **kw)
        return v, e, t, np.zeros_like(ok)

    monkeypatch.setattr(w, "_series_block", broken)
    with pytest.warns(RuntimeWarning, match="sign-stability"):
        v = w.knu_series(ComplexOrder(1, 0.5), 2.0).re_k
    assert close(v, mp_re_k(1, 0.5, 2.0))
