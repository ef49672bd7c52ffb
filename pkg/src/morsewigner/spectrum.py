"""Morse oscillator bound states in the units hbar = a = m = 1.

In these units the well depth is ``D = lam**2 / 2`` and the harmonic frequency
``omega0 = lam``. Energies are reported both as the ratio ``eps = E / D`` and in
units of ``hbar * omega0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


@dataclass(frozen=True)
class MorseParams:
    """Dimensionless well-depth parameter ``lam = sqrt(2 m D) / (a hbar)``."""

    lam: float

    def __post_init__(self):
        if not (self.lam > 0.5) or not math.isfinite(self.lam):
            raise ValueError(f"lambda must be > 0.5 for a bound state, got {self.lam!r}")

    @property
    def depth(self) -> float:
        return 0.5 * self.lam**2

    @property
    def omega0(self) -> float:
        return float(self.lam)

    @property
    def num_levels(self) -> int:
        return num_levels(self)


@dataclass(frozen=True)
class QuantumLevel:
    n: int
    eps: float
    energy: float  # units of hbar * omega0


@dataclass(frozen=True)
class PhasePoint:
    """Canonical point (q, p) with q = a x and p in units of hbar."""

    q: float
    p: float

    def to_scaled(self, params: MorseParams) -> tuple[float, float]:
        return to_scaled(self.q, self.p, params)

    @classmethod
    def from_scaled(cls, Q: float, P: float, params: MorseParams) -> "PhasePoint":
        q, p = from_scaled(Q, P, params)
        return cls(q, p)


def to_scaled(q, p, params: MorseParams):
    """(q, p) -> harmonic-oscillator coordinates (Q, P)."""
    s = math.sqrt(params.lam)
    return q * s, p / s


def from_scaled(Q, P, params: MorseParams):
    s = math.sqrt(params.lam)
    return Q / s, P * s


def num_levels(params: MorseParams) -> int:
    # n runs up to the largest integer strictly below lam - 1/2
    return int(math.ceil(params.lam - 0.5))


def _check_level(params: MorseParams, n: int) -> None:
    if n < 0 or n >= num_levels(params):
        raise IndexError(f"n={n} outside bound-state range 0..{num_levels(params) - 1} for lambda={params.lam}")


def eigenvalue(params: MorseParams, n: int) -> QuantumLevel:
    _check_level(params, n)
    lam = params.lam
    h = n + 0.5
    eps = (2.0 / lam) * h * (1.0 - h / (2.0 * lam))
    energy = h - h * h / (2.0 * lam)
    return QuantumLevel(n, eps, energy)


def spectrum(params: MorseParams) -> list[QuantumLevel]:
    return [eigenvalue(params, n) for n in range(num_levels(params))]


def potential(Q, params: MorseParams):
    """Dimensionless potential V(Q) in units of hbar * omega0."""
    lam = params.lam
    return 0.5 * lam * (-np.expm1(-np.asarray(Q, dtype=float) / math.sqrt(lam))) ** 2


def log_binom(a: float, m: int) -> float:
    """log C(a, m) for real a > m - 1 and integer m >= 0."""
    return float(gammaln(a + 1.0) - gammaln(m + 1.0) - gammaln(a - m + 1.0))


def laguerre_poly(n: int, s: float, xi):
    """Sum_j C(n + 2s, n - j) (-xi)^j / j!, i.e. the generalized Laguerre
    polynomial of degree n and parameter 2s."""
    if n < 0:
        raise ValueError("n must be non-negative")
    xi = np.asarray(xi, dtype=float)
    out = np.zeros_like(xi)
    for j in range(n + 1):
        c = math.exp(log_binom(n + 2.0 * s, n - j) - gammaln(j + 1.0))
        out = out + c * (-xi) ** j
    return out if out.ndim else float(out)


def log_norm(params: MorseParams, n: int) -> float:
    """log N(lam, n) of the normalized eigenfunction."""
    lam = params.lam
    return 0.5 * (math.log(2 * lam - 2 * n - 1) + gammaln(n + 1.0) - gammaln(2 * lam - n))


def wavefunction(params: MorseParams, n: int, q):
    """Normalized eigenfunction psi_n(q), with  int psi_n^2 dq = 1."""
    _check_level(params, n)
    lam = params.lam
    s = lam - n - 0.5
    q = np.asarray(q, dtype=float)
    log_xi = math.log(2.0 * lam) - q
    xi = np.exp(log_xi)
    with np.errstate(over="ignore", invalid="ignore"):
        log_env = log_norm(params, n) + s * log_xi - 0.5 * xi
        out = np.exp(log_env) * laguerre_poly(n, s, xi)
    # beyond this the envelope is below double underflow
    out = np.where(log_env < -745.0, 0.0, out)
    return out if out.ndim else float(out)
