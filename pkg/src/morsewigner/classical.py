"""Exact classical motion in the Morse well.

Time is measured by the phase ``theta = omega0 * t``; with hbar = a = m = 1 the
physical time is ``theta / lam``. For a bound orbit of energy ratio ``eps`` the
trajectory is

    q = ln{[1 + sqrt(eps) sin(phi)] / (1 - eps)},
    p = lam sqrt(eps) sqrt(1 - eps) cos(phi) / [1 + sqrt(eps) sin(phi)],

with ``phi = sqrt(1 - eps) (theta - theta0)``.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .spectrum import MorseParams, PhasePoint

# one connected orbit per bound energy in a single well
NU_MAX = 1


class EnergyClass(enum.Enum):
    BOUND = "bound"
    THRESHOLD = "threshold"
    OPEN = "open"


@dataclass(frozen=True)
class Orbit:
    eps: float
    theta0: float = 0.0
    nu: int = 1

    def __post_init__(self):
        if not (0.0 <= self.eps < 1.0):
            raise ValueError(f"bound orbit needs 0 <= eps < 1, got {self.eps!r}")
        if not (1 <= self.nu <= NU_MAX):
            raise ValueError(f"orbit label nu must be in 1..{NU_MAX}")

    @property
    def period_theta(self) -> float:
        return 2.0 * math.pi / math.sqrt(1.0 - self.eps)


def energy_ratio(q, p, params: MorseParams):
    """eps = E / D at (q, p)."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    out = (p / params.lam) ** 2 + np.expm1(-q) ** 2
    return out if out.ndim else float(out)


def classify(eps: float) -> EnergyClass:
    if eps < 1.0:
        return EnergyClass.BOUND
    if eps == 1.0:
        return EnergyClass.THRESHOLD
    return EnergyClass.OPEN


def trajectory(orbit: Orbit, params: MorseParams, theta):
    """(q, p) on ``orbit`` at phase ``theta``; vectorized in theta."""
    return _trajectory(orbit.eps, orbit.theta0, params.lam, theta)


def _trajectory(eps, theta0, lam, theta):
    eps = np.asarray(eps, dtype=float)
    se = np.sqrt(eps)
    w = np.sqrt(1.0 - eps)
    phi = w * (np.asarray(theta, dtype=float) - theta0)
    den = 1.0 + se * np.sin(phi)
    q = np.log(den) - np.log1p(-eps)
    p = lam * se * w * np.cos(phi) / den
    return q, p


def orbit_from_point(point: PhasePoint, params: MorseParams) -> Orbit | EnergyClass:
    """Orbit through ``point`` (placed at theta = 0), or the open classification."""
    eps = energy_ratio(point.q, point.p, params)
    kind = classify(eps)
    if kind is not EnergyClass.BOUND:
        return EnergyClass.OPEN
    if eps == 0.0:
        return Orbit(0.0, 0.0)
    se = math.sqrt(eps)
    w = math.sqrt(1.0 - eps)
    den = (1.0 - eps) * math.exp(point.q)
    sin_phi = (den - 1.0) / se
    cos_phi = point.p * den / (params.lam * se * w)
    phi = math.atan2(sin_phi, cos_phi)
    return Orbit(eps, -phi / w)


def period(eps: float, params: MorseParams) -> float:
    """Period T = 2 pi / (omega0 sqrt(1 - eps)) in physical time units."""
    if not (0.0 <= eps < 1.0):
        raise ValueError(f"period diverges / undefined for eps={eps!r} (need 0 <= eps < 1)")
    return 2.0 * math.pi / (params.omega0 * math.sqrt(1.0 - eps))


def turning_points(eps: float) -> tuple[float, float]:
    """The two roots of (1 - e^{-q})^2 = eps."""
    se = math.sqrt(eps)
    return -math.log1p(se), -math.log1p(-se)


def equation_of_motion(theta, y):
    """First-order form of 2 q'' = -d/dq (1 - e^{-q})^2 in theta, y = (q, dq/dtheta)."""
    q, v = y
    return [v, -np.exp(-q) * (1.0 - np.exp(-q))]


def jacobian_check(eps: float, t: float, params: MorseParams, theta0: float = 0.0,
                   rel_step: float = 1e-6) -> float:
    """Central-difference determinant d(p, q)/d(E, t) of the map (E, t) -> (q, p).

    E = eps * D and t is physical time. The exact value is 1.
    """
    lam = params.lam
    D = params.depth
    E = eps * D
    T = period(eps, params)
    if not (0.0 < eps < 1.0):
        raise ValueError("Jacobian check needs 0 < eps < 1")
    hE = rel_step * E
    ht = rel_step * T
    phi = math.sqrt(1.0 - eps) * (lam * t - theta0)
    if abs(math.cos(phi)) < 1e-3:
        warnings.warn("finite-difference Jacobian evaluated near a turning point; result is step-size "
                      "sensitive", RuntimeWarning, stacklevel=2)

    def qp(E_, t_):
        return _trajectory(E_ / D, theta0, lam, lam * t_)

    qEp, pEp = qp(E + hE, t)
    qEm, pEm = qp(E - hE, t)
    qtp, ptp = qp(E, t + ht)
    qtm, ptm = qp(E, t - ht)
    dq_dE = (qEp - qEm) / (2 * hE)
    dp_dE = (pEp - pEm) / (2 * hE)
    dq_dt = (qtp - qtm) / (2 * ht)
    dp_dt = (ptp - ptm) / (2 * ht)
    return float(dp_dE * dq_dt - dq_dE * dp_dt)
