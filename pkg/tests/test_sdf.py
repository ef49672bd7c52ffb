import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morsewigner.classical import Orbit, energy_ratio, period, trajectory
from morsewigner.grid import sample_grid, support_window, trapezoid_weights
from morsewigner.sdf import (Observable, SdfProfile, average_classical, average_quantum, cached_profile,
                             energy_periods, is_energy_function, profile_energies, rc_density, rc_integral,
                             sdf_at_energy, sdf_at_point, sdf_values)
from morsewigner.spectrum import MorseParams, PhasePoint
from morsewigner.verify import orbit_time_average
from morsewigner.wigner import wdf_values


def profile(lam):
    return cached_profile(float(lam), 0)


def test_origin_value_lam1():
    params = MorseParams(1.0)
    v = sdf_at_energy(params, 0, 0.0)
    assert v == pytest.approx(0.145, abs=0.005)
    # the eps = 0 orbit is the fixed point (0, 0)
    assert v == pytest.approx(wdf_values(params, 0, 0.0, 0.0), rel=1e-14)


@pytest.mark.parametrize("lam, target", [(2.0, 0.227), (4.0, 0.271), (10.0, 0.299)])
def test_origin_values(lam, target):
    assert sdf_at_energy(MorseParams(lam), 0, 0.0) == pytest.approx(target, abs=0.005)


def test_lam1_anomaly():
    eps_pk, rho_pk = profile(1.0).peak()
    assert rho_pk == pytest.approx(0.179, abs=0.005)
    assert eps_pk * 1.0 / 2.0 == pytest.approx(0.26, abs=0.05)
    assert rho_pk > profile(1.0).rho_c[0] + 0.02


@pytest.mark.parametrize("lam", [2.0, 4.0, 10.0])
def test_monotone_for_deeper_wells(lam):
    r = profile(lam).rho_c
    assert np.all(np.diff(r) <= 1e-12)


def test_not_monotone_for_single_level_well():
    assert np.any(np.diff(profile(1.0).rho_c) > 1e-6)


def test_open_orbits_are_zero():
    params = MorseParams(2.0)
    assert sdf_at_energy(params, 0, 1.0) == 0.0
    assert sdf_at_energy(params, 0, 3.0) == 0.0
    assert sdf_at_point(params, 0, PhasePoint(0.0, 2.0)) == 0.0
    assert profile(2.0)(1.0) == 0.0
    assert profile(2.0)(np.array([1.5, 0.0]))[0] == 0.0


def test_argument_checks():
    params = MorseParams(2.0)
    with pytest.raises(ValueError):
        sdf_at_energy(params, 0, -0.1)
    with pytest.raises(ValueError):
        sdf_at_energy(params, 0, 0.3, quad_points=8)
    with pytest.raises(ValueError):
        SdfProfile(2.0, 0, np.array([0.0, 0.5]), np.array([0.1, np.nan]), 256)


def test_point_and_energy_paths_agree():
    params = MorseParams(2.0)
    assert sdf_at_point(params, 0, PhasePoint(0.0, 0.0)) == sdf_at_energy(params, 0, 0.0)
    pt = PhasePoint(0.4, 0.9)
    eps = energy_ratio(pt.q, pt.p, params)
    direct = sdf_at_point(params, 0, pt)
    assert direct == pytest.approx(sdf_at_energy(params, 0, eps), rel=1e-14)
    assert sdf_at_point(params, 0, pt, profile=profile(2.0)) == pytest.approx(direct, abs=1e-7)


@pytest.mark.parametrize("lam", [1.0, 10.0])
def test_profile_interpolation_accuracy(lam):
    prof = profile(lam)
    params = MorseParams(lam)
    for eps in (0.013, 0.37, 0.81, 0.97):
        assert prof(eps) == pytest.approx(sdf_at_energy(params, 0, eps), abs=1e-7)


def test_profile_grid_clustered():
    e = profile_energies(400)
    assert e[0] == 0.0 and e[-1] < 1.0 and e.size == 400
    gaps = np.diff(e)
    assert gaps[-1] < gaps[0] / 100


def test_two_points_on_one_orbit():
    params = MorseParams(4.0)
    orbit = Orbit(0.45)
    q, p = trajectory(orbit, params, np.array([0.3, 4.1]))
    a = orbit_time_average(params, 0, PhasePoint(q[0], p[0]))
    b = orbit_time_average(params, 0, PhasePoint(q[1], p[1]))
    assert abs(a - b) < 1e-10
    assert abs(a - sdf_at_energy(params, 0, 0.45)) < 1e-10


@pytest.mark.parametrize("lam", [1.0, 4.0])
def test_quadrature_doubling(lam):
    params = MorseParams(lam)
    for eps in (0.05, 0.5, 0.9):
        a = sdf_at_energy(params, 0, eps, quad_points=256)
        b = sdf_at_energy(params, 0, eps, quad_points=512)
        assert abs(a - b) <= 1e-8 * abs(b)


def test_sdf_values_vectorized():
    params = MorseParams(4.0)
    q = np.array([0.0, 0.2, 3.0])
    p = np.array([0.0, 1.0, 0.0])
    v = sdf_values(params, profile(4.0), q, p)
    assert v.shape == (3,) and v[0] == pytest.approx(profile(4.0).rho_c[0])


# ---------------------------------------------------------------- energy densities


def test_rc_density_definition():
    params = MorseParams(2.0)
    eps = np.array([0.0, 0.3, 0.8])
    d = rc_density(params, 0, eps)
    assert np.allclose(d.r_c / d.period, d.rho_c, rtol=1e-14)
    assert np.allclose(d.period, energy_periods(params, eps))
    assert d.de_deps == pytest.approx(params.depth)


def test_rc_integral_trend():
    vals = [rc_integral(MorseParams(lam), 0, profile=profile(lam)) for lam in (1.0, 2.0, 4.0, 10.0)]
    assert all(v <= 1.0 for v in vals)
    assert vals == sorted(vals)
    assert vals[-1] >= 0.99


@pytest.mark.slow
@pytest.mark.parametrize("lam", [2.0, 10.0])
def test_bound_mass_matches_phase_space_integral(lam):
    """Orbit averaging and direct integration of rho over eps < 1 give the same mass."""
    params = MorseParams(lam)
    g = sample_grid("wdf", params, 0, window=support_window(params), resolution=400)
    s = math.sqrt(lam)
    Q, P = g.mesh()
    eps = energy_ratio(Q / s, P * s, params)
    w = trapezoid_weights(g) * g.values
    tol = 1e-5 if lam == 10.0 else 5e-4  # grid error of the discontinuous eps < 1 indicator
    assert rc_integral(params, 0, profile=profile(lam)) == pytest.approx((w * (eps < 1)).sum(), abs=tol)
    ec = average_classical(params, 0, Observable.energy(params), profile=profile(lam))
    assert ec == pytest.approx((w * (eps < 1) * eps).sum(), abs=tol)


# ---------------------------------------------------------------- averages


@pytest.fixture(scope="module")
def grid10():
    params = MorseParams(10.0)
    return sample_grid("wdf", params, 0, window=support_window(params), resolution=400, tol=1e-13)


def test_quantum_averages(grid10):
    params = MorseParams(10.0)
    assert average_quantum(params, 0, Observable.constant(), grid10) == pytest.approx(1.0, abs=1e-3)
    assert average_quantum(params, 0, Observable.energy(params), grid10) == pytest.approx(0.0975, abs=2e-3)
    assert abs(average_quantum(params, 0, Observable.momentum(), grid10)) < 1e-6


def test_quantum_average_truncation_warning():
    params = MorseParams(2.0)
    g = sample_grid("wdf", params, 0, window=(-1, 1, -1, 1), resolution=32)
    with pytest.warns(RuntimeWarning, match="boundary"):
        average_quantum(params, 0, Observable.constant(), g)
    with pytest.raises(ValueError):
        average_quantum(params, 0, Observable.constant(), sample_grid("sdf", params, 0, resolution=32))


def test_classical_averages():
    params = MorseParams(10.0)
    prof = profile(10.0)
    one = average_classical(params, 0, Observable.constant(), profile=prof)
    assert one == pytest.approx(rc_integral(params, 0, profile=prof), rel=1e-15)
    assert abs(average_classical(params, 0, Observable.momentum(), profile=prof)) < 1e-10
    fast = average_classical(params, 0, Observable.energy(params), profile=prof)
    slow = average_classical(params, 0, Observable.energy(params), profile=prof, use_energy_shortcut=False)
    assert fast == pytest.approx(slow, abs=1e-8)
    # quantum and classical energies differ by the open-orbit contribution only
    assert 0.0 < 0.0975 - fast < 2e-3


def test_energy_function_detection():
    params = MorseParams(3.0)
    assert is_energy_function(Observable.energy(params), params)
    assert is_energy_function(Observable.constant(2.0), params)
    assert not is_energy_function(Observable.momentum(), params)
    assert not is_energy_function(Observable.position(), params)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.02, 0.85), st.floats(0, 1), st.floats(0, 1))
def test_orbit_constancy_property(eps, f1, f2):
    params = MorseParams(2.0)
    orbit = Orbit(eps)
    q, p = trajectory(orbit, params, orbit.period_theta * np.array([f1, f2]))
    a = orbit_time_average(params, 0, PhasePoint(q[0], p[0]), points=2048)
    b = orbit_time_average(params, 0, PhasePoint(q[1], p[1]), points=2048)
    assert abs(a - b) < 1e-9
