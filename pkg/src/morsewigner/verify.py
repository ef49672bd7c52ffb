"""Invariant checks shared by the ``verify`` command and the acceptance tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .classical import (Orbit, _trajectory, energy_ratio, equation_of_motion, jacobian_check, orbit_from_point,
                        period, trajectory, turning_points)
from .grid import sample_grid, support_window, trapezoid_weights
from .sdf import sdf_at_energy
from .spectrum import MorseParams, PhasePoint, wavefunction
from .wigner import DEFAULT_TOL, ComplexOrder, knu_oracle, knu_series, wdf_marginal_position, wdf_values


@dataclass(frozen=True)
class CheckResult:
    name: str
    lam: float | None
    passed: bool
    value: float  # worst observed deviation
    tol: float
    detail: str = ""


def _result(name, lam, value, tol, detail=""):
    return CheckResult(name, lam, bool(value <= tol), float(value), float(tol), detail)


def check_normalization(params: MorseParams, n: int = 0, resolution: int = 400, tol: float = 1e-3,
                        knu_tol: float = DEFAULT_TOL) -> CheckResult:
    """|sum rho dQ dP - 1| on a window covering the state."""
    g = sample_grid("wdf", params, n, window=support_window(params, n), resolution=resolution, tol=knu_tol)
    total = float((g.values * trapezoid_weights(g)).sum())
    return _result("normalization", params.lam, abs(total - 1.0), tol, f"integral={total:.12g}")


def marginal_samples(params: MorseParams, n: int = 0, count: int = 20) -> np.ndarray:
    """``count`` positions spanning the region where |psi|^2 exceeds 1e-3 of its maximum."""
    q = np.linspace(-5.0, 40.0, 45001)
    d = np.asarray(wavefunction(params, n, q)) ** 2
    keep = q[d > 1e-3 * d.max()]
    return np.linspace(keep[0], keep[-1], count)


def check_marginal(params: MorseParams, n: int = 0, tol: float = 1e-4, count: int = 20, dp: float = 0.02,
                   knu_tol: float = DEFAULT_TOL) -> CheckResult:
    q = marginal_samples(params, n, count)
    p_max = max(12.0, 7.0 * math.sqrt(params.lam))
    marg = wdf_marginal_position(params, n, q, p_max, dp, tol=knu_tol)
    psi2 = np.asarray(wavefunction(params, n, q)) ** 2
    err = float(np.max(np.abs(marg - psi2)))
    return _result("marginal", params.lam, err, tol, f"{count} positions")


def check_symmetry(params: MorseParams, n: int = 0, tol: float = 1e-10, seed: int = 0,
                   samples: int = 64) -> CheckResult:
    """Evenness in p of rho and symmetry of the evaluated Re K in N and k."""
    rng = np.random.default_rng(seed)
    q = rng.uniform(-1.0, 4.0, samples)
    p = rng.uniform(0.0, 3.0 * math.sqrt(params.lam), samples)
    even = np.max(np.abs(wdf_values(params, n, q, p) - wdf_values(params, n, q, -p)))
    worst = float(even)
    for N, k, xi in [(1, 0.7, 2.0), (2, 1.3, 0.5), (3, 0.2, 5.0)]:
        a = knu_series(ComplexOrder(N, k), xi).re_k
        b = knu_series(ComplexOrder(-N, k), xi).re_k
        c = knu_series(ComplexOrder(N, -k), xi).re_k
        worst = max(worst, abs(a - b), abs(a - c))
        # the quadrature integrates tau > 1 and tau < 1 with +-N separately, so this is not structural
        o1 = knu_oracle(ComplexOrder(N, k), xi)
        o2 = knu_oracle(ComplexOrder(-N, k), xi)
        o3 = knu_oracle(ComplexOrder(N, -k), xi)
        worst = max(worst, abs(o1 - o2), abs(o1 - o3))
    if n > 0:
        worst = max(worst, float(np.max(np.abs(wdf_values(params, n, q, p, symmetrize=True)
                                               - wdf_values(params, n, q, p, symmetrize=False)))))
    return _result("symmetry", params.lam, worst, tol)


ORACLE_LATTICE = {
    "N": (0, 1, 2, 3),
    "xi": (0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0),
    "k": (0.01, 0.1, 0.5, 1.0, 2.0, 5.0),
}


def check_oracle(lattice: dict | None = None, knu_tol: float = DEFAULT_TOL) -> CheckResult:
    """Series vs direct quadrature: worst |diff| / max(1e-8, 1e-6 |value|) must stay <= 1."""
    lat = lattice or {"N": (0, 1, 2, 3), "xi": (0.5, 2.0, 10.0), "k": (0.1, 1.0, 5.0)}
    worst, where = 0.0, ""
    for N in lat["N"]:
        for xi in lat["xi"]:
            for k in lat["k"]:
                s = knu_series(ComplexOrder(N, k), xi, tol=knu_tol).re_k
                o = knu_oracle(ComplexOrder(N, k), xi)
                r = abs(s - o) / max(1e-8, 1e-6 * abs(o))
                if r > worst:
                    worst, where = r, f"N={N} xi={xi} k={k}"
    return _result("oracle", None, worst, 1.0, where)


def orbit_time_average(params: MorseParams, n: int, point: PhasePoint, points: int = 4096) -> float:
    """Uniform-time trapezoid average of rho along the orbit that starts at ``point``."""
    orbit = orbit_from_point(point, params)
    theta = orbit.theta0 + orbit.period_theta * np.arange(points) / points
    q, p = trajectory(orbit, params, theta)
    return float(np.mean(wdf_values(params, n, q, p)))


def check_orbit_constancy(params: MorseParams, n: int = 0, tol: float = 1e-9, pairs: int = 4,
                          seed: int = 1, eps_values=(0.2, 0.6, 0.85)) -> CheckResult:
    """Time averages started from different points of one orbit agree, and match rho_c(eps)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for eps in eps_values:
        orbit = Orbit(eps)
        ref = sdf_at_energy(params, n, eps)
        for _ in range(pairs):
            th = rng.uniform(0.0, orbit.period_theta, 2)
            q, p = trajectory(orbit, params, th)
            a = orbit_time_average(params, n, PhasePoint(q[0], p[0]))
            b = orbit_time_average(params, n, PhasePoint(q[1], p[1]))
            worst = max(worst, abs(a - b), abs(a - ref))
    return _result("orbit_constancy", params.lam, worst, tol)


def check_jacobian(params: MorseParams, tol: float = 1e-5) -> CheckResult:
    worst = 0.0
    for eps, frac in [(0.3, 0.1), (0.5, 0.3), (0.9, 0.4)]:
        t = frac * period(eps, params)
        worst = max(worst, abs(jacobian_check(eps, t, params) - 1.0))
    return _result("jacobian", params.lam, worst, tol)


def integrated_period(eps: float, rtol: float = 1e-12) -> float:
    """Period in theta from integrating the equation of motion between two upward mid-crossings."""
    q_lo, q_hi = turning_points(eps)
    q_mid = 0.5 * (q_lo + q_hi)

    def crossing(theta, y):
        return y[0] - q_mid
    crossing.direction = 1.0

    T_guess = 2.0 * math.pi / math.sqrt(1.0 - eps)
    sol = solve_ivp(equation_of_motion, (0.0, 2.6 * T_guess), [q_lo, 0.0], method="DOP853", rtol=rtol,
                    atol=1e-14, events=crossing)
    t_ev = sol.t_events[0]
    if len(t_ev) < 2:
        raise RuntimeError(f"fewer than two crossings integrating eps={eps}")
    return float(t_ev[1] - t_ev[0])


def check_period(params: MorseParams, tol: float = 1e-6) -> CheckResult:
    worst = 0.0
    for eps in (0.1, 0.5, 0.9):
        exact = period(eps, params) * params.omega0
        worst = max(worst, abs(integrated_period(eps) - exact) / exact)
    return _result("period_ode", params.lam, worst, tol)


def check_energy_conservation(params: MorseParams, tol: float = 1e-12) -> CheckResult:
    worst = 0.0
    for eps in (0.1, 0.5, 0.9, 0.99):
        th = np.linspace(0.0, 2.0 * math.pi / math.sqrt(1.0 - eps), 257)
        q, p = _trajectory(eps, 0.0, params.lam, th)
        worst = max(worst, float(np.max(np.abs(energy_ratio(q, p, params) - eps))))
    return _result("energy_conservation", params.lam, worst, tol)


def run_checks(lams=(1.0, 2.0, 4.0, 10.0), n: int = 0, resolution: int = 400, norm_tol: float = 1e-3,
               marginal_tol: float = 1e-4, knu_tol: float = DEFAULT_TOL) -> list[CheckResult]:
    out = [check_oracle(knu_tol=knu_tol)]
    for lam in lams:
        params = MorseParams(lam)
        out += [
            check_normalization(params, n, resolution, norm_tol, knu_tol),
            check_marginal(params, n, marginal_tol, knu_tol=knu_tol),
            check_symmetry(params, n),
            check_orbit_constancy(params, n),
            check_jacobian(params),
            check_period(params),
            check_energy_conservation(params),
        ]
    return out
