"""Semiclassical distribution function: the Wigner function averaged over
classical orbits.

For a stationary state the semiclassical density depends on energy only,

    rho_c(eps) = (1/T) int_0^T rho(q(t), p(t)) dt,

and vanishes on open orbits (eps >= 1). The orbit average is evaluated with the
trapezoid rule in the orbit phase, which converges geometrically for the
smooth periodic integrand. Energy densities are stored against ``eps`` together with
the constants that convert to E in units of hbar * omega0 (``E = eps * lam / 2``).
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .classical import _trajectory, energy_ratio, period, trajectory, Orbit
from .spectrum import MorseParams, PhasePoint, _check_level
from .wigner import DEFAULT_TOL, wdf_values


class SdfConvergenceError(RuntimeError):
    pass


DEFAULT_QUAD_POINTS = 256
DEFAULT_PROFILE_SIZE = 400
# absolute floors (units 1/hbar) for refinement and for declaring non-convergence
REFINE_ATOL = 1e-13
FAIL_ATOL = 1e-12


def profile_energies(size: int = DEFAULT_PROFILE_SIZE) -> np.ndarray:
    """Energy ratios in [0, 1), uniform near 0 and cosine-clustered toward 1."""
    t = np.arange(size) / size
    return np.sin(0.5 * math.pi * t)


def _orbit_average(params, n, eps, quad_points, rtol, atol, max_points, tol):
    """Trapezoid orbit averages for an array of energies, doubling per energy until converged.

    Returns (rho_c, points used). Each doubling reuses the previous samples.
    """
    eps = np.asarray(eps, dtype=float)
    m = int(quad_points)
    # phases in units of the orbit period
    frac = np.arange(m) / m
    sums = _sample_sum(params, n, eps, frac, tol)
    value = sums / m
    used = np.full(eps.shape, m)
    active = np.ones(eps.shape, dtype=bool)
    last_change = np.full(eps.shape, np.inf)
    while active.any():
        if m >= max_points:
            bad = active & (last_change > 1e-6 * np.abs(value) + FAIL_ATOL)
            if bad.any():
                i = np.nonzero(bad)[0][0]
                raise SdfConvergenceError(
                    f"orbit average not converged at eps={eps[i]:.8g} with {m} points "
                    f"(last change {last_change[i]:.3g})")
            break
        idx = np.nonzero(active)[0]
        mids = (np.arange(m) + 0.5) / m
        extra = _sample_sum(params, n, eps[idx], mids, tol)
        new_sum = sums[idx] + extra
        new_val = new_sum / (2 * m)
        change = np.abs(new_val - value[idx])
        sums[idx] = new_sum
        value[idx] = new_val
        used[idx] = 2 * m
        last_change[idx] = change
        conv = change <= rtol * np.abs(new_val) + atol
        active[idx[conv]] = False
        m *= 2
    return value, used


def bounce_clustering(eps) -> np.ndarray:
    """Phase-map parameter beta in (0, 1]; 1 means uniform sampling in time.

    Near eps = 1 the orbit passes the repulsive wall in a phase window of width
    ~sqrt(2 (1 - sqrt(eps))); sampling is concentrated there by ~1/beta.
    """
    eps = np.asarray(eps, dtype=float)
    width = np.sqrt(2.0 * (1.0 - np.sqrt(eps)))
    return np.minimum(1.0, np.sqrt(width))


def _sample_sum(params, n, eps, frac, tol):
    """Sum of rho * dphi/dpsi over mapped phases psi = 2 pi frac.

    phi = -pi/2 + 2 atan(beta tan(psi/2)) is a periodic reparametrization
    centred on the inner turning point, so the trapezoid rule in psi stays
    geometrically convergent.
    """
    eps = np.atleast_1d(eps)
    beta = bounce_clustering(eps)[:, None]
    half = np.pi * frac[None, :]
    c, s = np.cos(half), np.sin(half)
    phi = -0.5 * np.pi + 2.0 * np.arctan2(beta * s, c)
    dphi = beta / (c**2 + (beta * s) ** 2)
    w = np.sqrt(1.0 - eps)[:, None]
    q, p = _trajectory(eps[:, None], 0.0, params.lam, phi / w)
    rho = wdf_values(params, n, q, p, tol=tol)
    return (rho * dphi).sum(axis=1)


def sdf_at_energy(params: MorseParams, n: int, eps: float, quad_points: int = DEFAULT_QUAD_POINTS,
                  rtol: float = 1e-10, max_points: int = 2**16, tol: float = DEFAULT_TOL) -> float:
    """rho_c on the orbit of energy ratio ``eps`` (0 for eps >= 1)."""
    _check_level(params, n)
    if quad_points < 16:
        raise ValueError("quad_points must be >= 16")
    if eps >= 1.0:
        return 0.0
    if eps < 0.0:
        raise ValueError("eps must be non-negative")
    val, _ = _orbit_average(params, n, np.array([eps]), quad_points, rtol, REFINE_ATOL, max_points, tol)
    return float(val[0])


@dataclass(frozen=True)
class SdfProfile:
    """rho_c sampled on an energy-ratio grid, with cubic interpolation."""

    lam: float
    n: int
    eps_grid: np.ndarray
    rho_c: np.ndarray
    t_quad_points: int
    points_used: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if not np.all(np.isfinite(self.rho_c)):
            raise ValueError("non-finite rho_c in profile")
        object.__setattr__(self, "_spline", CubicSpline(self.eps_grid, self.rho_c))

    @property
    def params(self) -> MorseParams:
        return MorseParams(self.lam)

    @property
    def energy(self) -> np.ndarray:
        """Energies in units of hbar * omega0."""
        return self.eps_grid * self.lam / 2.0

    def __call__(self, eps):
        """Interpolated rho_c; clamped to the last sample up to eps = 1 and 0 beyond."""
        eps = np.asarray(eps, dtype=float)
        top = self.eps_grid[-1]
        inside = self._spline(np.clip(eps, 0.0, top))
        out = np.where(eps >= 1.0, 0.0, inside)
        return out if out.ndim else float(out)

    def peak(self, fine: int = 20001) -> tuple[float, float]:
        """(eps, rho_c) at the maximum of the interpolated profile."""
        e = np.linspace(0.0, self.eps_grid[-1], fine)
        r = self._spline(e)
        i = int(np.argmax(r))
        return float(e[i]), float(r[i])


def sdf_profile(params: MorseParams, n: int = 0, eps_grid=None, quad_points: int = DEFAULT_QUAD_POINTS,
                rtol: float = 1e-10, max_points: int = 2**16, tol: float = DEFAULT_TOL) -> SdfProfile:
    _check_level(params, n)
    eps_grid = profile_energies() if eps_grid is None else np.asarray(eps_grid, dtype=float)
    if np.any(eps_grid < 0) or np.any(eps_grid >= 1) or np.any(np.diff(eps_grid) <= 0):
        raise ValueError("eps_grid must be strictly ascending inside [0, 1)")
    val, used = _orbit_average(params, n, eps_grid, quad_points, rtol, REFINE_ATOL, max_points, tol)
    return SdfProfile(params.lam, n, eps_grid, val, quad_points, used)


@functools.lru_cache(maxsize=32)
def cached_profile(lam: float, n: int = 0, quad_points: int = DEFAULT_QUAD_POINTS,
                   tol: float = DEFAULT_TOL) -> SdfProfile:
    """Process-wide memo of default-grid profiles keyed on (lam, n, quad_points, tol)."""
    return sdf_profile(MorseParams(lam), n, quad_points=quad_points, tol=tol)


def sdf_at_point(params: MorseParams, n: int, point: PhasePoint, profile: SdfProfile | None = None,
                 **kw) -> float:
    eps = energy_ratio(point.q, point.p, params)
    if eps >= 1.0:
        return 0.0
    if profile is not None:
        return float(profile(eps))
    return sdf_at_energy(params, n, eps, **kw)


def sdf_values(params: MorseParams, profile: SdfProfile, q, p):
    """Vectorized rho_c(q, p) from a profile."""
    return profile(energy_ratio(q, p, params))


# ---------------------------------------------------------------------------
# energy densities and averages


@dataclass(frozen=True)
class RcDensity:
    eps_grid: np.ndarray
    r_c: np.ndarray      # R_c = T rho_c, T in physical time
    period: np.ndarray
    rho_c: np.ndarray
    # dE = de_deps * d(eps) in physical units; E / (hbar omega0) = eps * e_unit
    de_deps: float
    e_unit: float


def rc_density(params: MorseParams, n: int, eps_grid, **kw) -> RcDensity:
    eps_grid = np.asarray(eps_grid, dtype=float)
    if np.any(eps_grid < 0) or np.any(eps_grid >= 1):
        raise ValueError("eps_grid must lie inside [0, 1)")
    rho_c, _ = _orbit_average(params, n, eps_grid, kw.get("quad_points", DEFAULT_QUAD_POINTS),
                              kw.get("rtol", 1e-10), REFINE_ATOL, kw.get("max_points", 2**16),
                              kw.get("tol", DEFAULT_TOL))
    T = 2.0 * math.pi / (params.omega0 * np.sqrt(1.0 - eps_grid))
    return RcDensity(eps_grid, T * rho_c, T, rho_c, params.depth, params.lam / 2.0)


def _w_nodes(nodes: int):
    """Gauss-Legendre nodes in w = sqrt(1 - eps) on (0, 1], which removes the 1/sqrt(1 - eps) weight."""
    x, wt = np.polynomial.legendre.leggauss(nodes)
    w = 0.5 * (x + 1.0)
    return 1.0 - w**2, 0.5 * wt, w


def rc_integral(params: MorseParams, n: int = 0, nodes: int = 96, profile: SdfProfile | None = None,
                **kw) -> float:
    """int R_c dE over the bound region.

    Equals the Wigner-function mass on eps < 1; the remainder sits on open orbits.
    """
    return average_classical(params, n, Observable.constant(1.0), nodes=nodes, profile=profile, **kw)


@dataclass(frozen=True)
class Observable:
    """Weyl symbol O(q, p); ``is_energy_function`` enables the constant-on-orbit shortcut."""

    weyl_fn: Callable
    is_energy_function: bool = False
    name: str = "O"

    def __call__(self, q, p):
        return np.asarray(self.weyl_fn(q, p), dtype=float) + 0.0 * np.asarray(q, dtype=float)

    @classmethod
    def constant(cls, c: float = 1.0) -> "Observable":
        return cls(lambda q, p: np.full(np.broadcast(np.asarray(q), np.asarray(p)).shape, c), True, "const")

    @classmethod
    def energy(cls, params: MorseParams) -> "Observable":
        return cls(lambda q, p: energy_ratio(q, p, params), True, "eps")

    @classmethod
    def momentum(cls) -> "Observable":
        return cls(lambda q, p: np.asarray(p, dtype=float), False, "p")

    @classmethod
    def position(cls) -> "Observable":
        return cls(lambda q, p: np.asarray(q, dtype=float), False, "q")


def orbit_average(obs: Observable, params: MorseParams, eps: float, points: int = 512) -> float:
    """Time average of O over one period of the orbit of energy ratio eps."""
    orbit = Orbit(eps)
    theta = np.arange(points) * orbit.period_theta / points
    q, p = trajectory(orbit, params, theta)
    return float(np.mean(obs(q, p)))


def is_energy_function(obs: Observable, params: MorseParams, samples: int = 20, seed: int = 0) -> bool:
    """Spot check that O is constant along random orbits."""
    rng = np.random.default_rng(seed)
    for eps in rng.uniform(0.01, 0.95, samples):
        orbit = Orbit(float(eps))
        th = rng.uniform(0.0, orbit.period_theta, 2)
        q, p = trajectory(orbit, params, th)
        v = obs(q, p)
        if not np.isclose(v[0], v[1], rtol=1e-9, atol=1e-12):
            return False
    return True


def average_classical(params: MorseParams, n: int, obs: Observable, nodes: int = 96,
                      profile: SdfProfile | None = None, use_energy_shortcut: bool = True,
                      orbit_points: int = 512, **kw) -> float:
    """<O>_c = int obar(E) R_c(E) dE over bound orbits.

    With ``dE = D d(eps)`` and ``T = 2 pi / (lam sqrt(1 - eps))`` the measure
    ``R_c dE`` becomes ``pi lam rho_c d(eps) / sqrt(1 - eps)``, integrated here in
    ``w = sqrt(1 - eps)``. ``profile`` replaces direct orbit averages by interpolation.
    """
    eps, wt, w = _w_nodes(nodes)
    if profile is not None:
        rho_c = profile(eps)
    else:
        rho_c, _ = _orbit_average(params, n, eps, kw.get("quad_points", DEFAULT_QUAD_POINTS),
                                  kw.get("rtol", 1e-10), REFINE_ATOL, kw.get("max_points", 2**16),
                                  kw.get("tol", DEFAULT_TOL))
    if obs.is_energy_function and use_energy_shortcut:
        q, p = _trajectory(eps, 0.0, params.lam, 0.0)
        obar = obs(q, p)
    else:
        obar = np.array([orbit_average(obs, params, float(e), orbit_points) for e in eps])
    # d(eps) = 2 w dw, 1/sqrt(1 - eps) = 1/w
    return float(np.sum(wt * 2.0 * math.pi * params.lam * obar * rho_c))


def average_quantum(params: MorseParams, n: int, obs: Observable, grid) -> float:
    """<O> = int O rho dq dp over a WDF DensityGrid (trapezoid weights)."""
    from .grid import trapezoid_weights
    if grid.kind != "wdf":
        raise ValueError("average_quantum needs a WDF grid")
    Q, P = grid.mesh()
    q, p = Q / math.sqrt(params.lam), P * math.sqrt(params.lam)
    edge = max(np.abs(grid.values[[0, -1], :]).max(), np.abs(grid.values[:, [0, -1]]).max())
    if edge > 1e-12:
        warnings.warn(f"grid boundary carries |rho| = {edge:.3g}; support may be truncated",
                      RuntimeWarning, stacklevel=2)
    return float(np.sum(trapezoid_weights(grid) * obs(q, p) * grid.values))


def energy_periods(params: MorseParams, eps_grid) -> np.ndarray:
    return np.array([period(float(e), params) for e in eps_grid])
