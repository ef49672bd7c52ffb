"""Wigner function of Morse eigenstates.

The Wigner function reduces to the real part of the modified Bessel-type
integral

    K_nu(xi) = 1/2 int_0^inf exp(-xi/2 (tau + 1/tau)) tau^(nu - 1) dtau,
    nu = N + 2ik,

which for large ``|k|`` is an integral of a rapidly oscillating integrand.
``knu_series`` folds the oscillating tail onto [0, pi/2] so that every term of
the resulting series has a fixed sign. ``knu_oracle`` is an independent (slow)
adaptive-quadrature reference.

Internally all values are carried scaled by ``exp(xi)`` so that the log-domain
prefactors of the Wigner function stay finite for deep wells.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import comb, gammaln

from .spectrum import MorseParams, PhasePoint, _check_level, log_binom, log_norm, wavefunction

K_AXIS_THRESHOLD = 1e-9
DEFAULT_TOL = 1e-10
ABS_FLOOR = 1e-15
# relative log-magnitude below which an integrand is treated as zero
_LOG_CUTOFF = 40.0
_HALF_PI = 0.5 * math.pi


class KnuConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ComplexOrder:
    """Order nu = N + 2ik of K_nu."""

    N: int
    k: float

    @property
    def nu(self) -> complex:
        return complex(self.N, 2.0 * self.k)


@dataclass(frozen=True)
class KnuResult:
    re_k: float
    est_err: float
    terms_used: int


@dataclass(frozen=True)
class WdfSample:
    point: PhasePoint
    rho: float


@lru_cache(maxsize=None)
def _gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


# ---------------------------------------------------------------------------
# extrema of f_N(z) = exp(-xi cosh(z/2k)) cosh(N z/2k) / 2k


def extremum_coefficients(N: int) -> list[float]:
    """A_j such that cosh(N w) = sum_j A_j (-1)^j y^(N - 2j), y = cosh w."""
    half = N // 2
    return [float(sum(comb(N, 2 * i, exact=True) * comb(i, j, exact=True) for i in range(j, half + 1)))
            for j in range(half + 1)]


def _cosh_poly(N: int) -> np.ndarray:
    """Coefficients of cosh(N w) as a polynomial in y, highest power first."""
    c = np.zeros(N + 1)
    for j, a in enumerate(extremum_coefficients(N)):
        c[2 * j] = a * (-1) ** j
    return c


def extremum_positions(N: int, xi: float) -> np.ndarray:
    """Real y = cosh(z/2k) >= 1 at which f_N has extrema, ascending.

    The extrema are the roots of p'(y) - xi p(y), p the polynomial above.
    """
    if N == 0:
        return np.empty(0)
    p = _cosh_poly(N)
    poly = np.polysub(np.polyder(p), xi * p)
    roots = np.roots(poly)
    real = roots[np.abs(roots.imag) <= 1e-9 * np.maximum(1.0, np.abs(roots.real))].real
    return np.sort(real[real >= 1.0])


def last_extremum_y(N: int, xi: np.ndarray) -> np.ndarray:
    """Largest extremum y (or 1.0 if f_N is already decreasing from z = 0)."""
    xi = np.asarray(xi, dtype=float)
    out = np.ones_like(xi)
    if N == 0:
        return out
    uniq, inv = np.unique(xi, return_inverse=True)
    ys = np.array([(lambda r: r[-1] if r.size else 1.0)(extremum_positions(N, x)) for x in uniq])
    return ys[inv].reshape(xi.shape)


def extremum_closed_form(N: int, xi: float) -> float:
    """Closed-form largest extremum y for N = 1, 2 (cross-check of the root path)."""
    if N == 1:
        return 1.0 / xi
    if N == 2:
        return 1.0 / xi + math.sqrt(1.0 / xi**2 + 0.5)
    raise ValueError("closed form available for N = 1, 2 only")


# ---------------------------------------------------------------------------
# vectorized kernels


def _log_f(N: int, k, xi, z):
    """log of exp(xi) * f_N(z); broadcasting over trailing node axes."""
    u = z / (2.0 * k)
    with np.errstate(over="ignore"):
        val = -np.log(2.0 * k) - 2.0 * xi * np.sinh(0.5 * u) ** 2
    if N:
        au = np.abs(u)
        val = val + N * au + np.log1p(np.exp(-2.0 * N * au)) - math.log(2.0)
    return val


def _f(N, k, xi, z):
    return np.exp(_log_f(N, k, xi, z))


def _support_end(N: int, k, xi, z0):
    """z beyond which exp(xi) f_N drops _LOG_CUTOFF below its value at z0 (z0 past the last extremum)."""
    ref = _log_f(N, k, xi, z0)
    lo = z0 / (2.0 * k)
    hi = lo + 1.0
    # bracket: grow until below cutoff
    for _ in range(200):
        bad = _log_f(N, k, xi, 2.0 * k * hi) > ref - _LOG_CUTOFF
        if not bad.any():
            break
        hi = np.where(bad, lo + 2.0 * (hi - lo), hi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        above = _log_f(N, k, xi, 2.0 * k * mid) > ref - _LOG_CUTOFF
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 2.0 * k * hi


def _nodes(a, length, m: int, order: int):
    """Composite Gauss-Legendre nodes/weights on [a, a + length] per point."""
    x, w = _gauss_legendre(order)
    cells = np.arange(m)[:, None] + x[None, :]  # (m, order)
    frac = (cells / m).ravel()
    h = (length / m)[:, None]
    nodes = a[:, None] + length[:, None] * frac[None, :]
    weights = h * np.tile(w, m)[None, :]
    return nodes, weights


def _subcells(length, k, h_u: float, cap: int) -> np.ndarray:
    """Per-point subcell counts, rounded up to powers of two.

    Counts depend on each point alone so that results do not change with the
    way a lattice is split into blocks or across workers.
    """
    need = np.maximum(np.ceil(length / (2.0 * k * h_u)), 1.0)
    m = np.exp2(np.ceil(np.log2(need)))
    return np.minimum(m, cap).astype(np.int64)


def _by_count(m):
    """(count, indices) groups of equal subcell count."""
    for mv in np.unique(m):
        yield int(mv), np.nonzero(m == mv)[0]


def _kahan_add(total, comp, x):
    y = x - comp
    t = total + y
    comp = (t - total) - y
    return t, comp


def _series_block(N, k, xi, tol, gl_order, h_u, max_terms, cap):
    """Scaled Re K for one block of points with k > 0. Returns (val, err, terms, sign_ok)."""
    npt = k.size
    # shift past the last extremum by a whole number of periods
    yM = last_extremum_y(N, xi)
    zM = 2.0 * k * np.arccosh(yM)
    Z = np.where(zM > 0.0, 2.0 * math.pi * np.ceil(zM / (2.0 * math.pi)), 0.0)
    z_end = _support_end(N, k, xi, Z)

    def F(z):
        return _f(N, k[:, None], xi[:, None], z + Z[:, None])

    # pre-extremum region [0, Z), integrated directly cell by cell
    pre = np.zeros(npt)
    pre_abs = np.zeros(npt)
    ncell = int(np.max(np.ceil(Z / _HALF_PI), initial=0))
    for c in range(ncell):
        a = np.full(npt, c * _HALF_PI)
        length = np.clip(np.minimum(a + _HALF_PI, np.minimum(Z, z_end)) - a, 0.0, None)
        if not (length > 0).any():
            break
        for m, ix in _by_count(_subcells(length, k, h_u, cap)):
            z, w = _nodes(a[ix], length[ix], m, gl_order)
            g = _f(N, k[ix, None], xi[ix, None], z) * np.cos(z)
            pre[ix] += np.sum(w * g, axis=1)
            pre_abs[ix] += np.sum(w * np.abs(g), axis=1)

    # head term int_0^{pi/2} F(x) cos x dx, truncated at the support end
    length = np.clip(z_end - Z, 0.0, _HALF_PI)
    head = np.zeros(npt)
    for m, ix in _by_count(_subcells(length, k, h_u, cap)):
        x, w = _nodes(np.zeros(ix.size), length[ix], m, gl_order)
        g = _f(N, k[ix, None], xi[ix, None], x + Z[ix, None]) * np.cos(x)
        head[ix] = np.sum(w * g, axis=1)

    # tail series: each bracket is non-negative for decreasing F
    total = np.zeros(npt)
    comp = np.zeros(npt)
    terms = np.ones(npt, dtype=np.int64)
    err = np.zeros(npt)
    sign_ok = np.ones(npt, dtype=bool)
    active = np.ones(npt, dtype=bool)
    zero = np.zeros((npt, 1))
    m_tail = _subcells(np.full(npt, _HALF_PI), k, h_u, cap)
    s = 0
    while True:
        a = (2 * s + 1) * math.pi
        tail = 2.0 * F(zero + (a - _HALF_PI))[:, 0]
        acc = np.abs(head) + total + np.abs(pre)
        done = active & (tail <= tol * acc + ABS_FLOOR)
        err = np.where(done, tail, err)
        active &= ~done
        if not active.any():
            break
        if s >= max_terms:
            raise KnuConvergenceError(
                f"K_nu series did not reach tol={tol} within {max_terms} terms "
                f"(N={N}, e.g. k={k[active][0]:.6g}, xi={xi[active][0]:.6g})")
        active_idx = np.nonzero(active)[0]
        for m, sub in _by_count(m_tail[active_idx]):
            idx = active_idx[sub]
            ki, xii, Zi = k[idx, None], xi[idx, None], Z[idx, None]
            x, w = _nodes(np.zeros(idx.size), np.full(idx.size, _HALF_PI), m, gl_order)
            br = (_f(N, ki, xii, Zi + a - x) + _f(N, ki, xii, Zi + a + x)
                  - _f(N, ki, xii, Zi + a + math.pi - x) - _f(N, ki, xii, Zi + a + math.pi + x))
            scale = _f(N, ki, xii, Zi)[:, 0]
            sign_ok[idx] &= np.min(br, axis=1) >= -1e-12 * scale
            term = np.sum(w * np.cos(x) * br, axis=1)
            total[idx], comp[idx] = _kahan_add(total[idx], comp[idx], term)
        idx = active_idx
        terms[idx] += 1
        s += 1
    val = pre + head - total
    err = err + 1e-15 * (np.abs(head) + total + pre_abs) * terms
    return val, err, terms, sign_ok


def _axis_scaled(N: int, xi, gl_order=32, h_u=0.25, cap=4096):
    """exp(xi) * int_0^inf exp(-xi cosh u) cosh(N u) du, vectorized composite GL."""
    xi = np.asarray(xi, dtype=float).ravel()
    one = np.ones_like(xi)
    u_end = _support_end(N, 0.5 * one, xi, np.zeros_like(xi))  # k = 1/2 makes z == u
    if N:
        # start of the decreasing region for cosh(N u) growth
        u_end = u_end + np.arccosh(last_extremum_y(N, xi))
    out = np.zeros_like(xi)
    for m, ix in _by_count(_subcells(u_end, 0.5 * one, h_u, cap)):
        u, w = _nodes(np.zeros(ix.size), u_end[ix], m, gl_order)
        g = np.exp(-2.0 * xi[ix, None] * np.sinh(0.5 * u) ** 2) * np.cosh(N * u)
        out[ix] = np.sum(w * g, axis=1)
    return out


def re_knu_scaled(N: int, k, xi, tol: float = DEFAULT_TOL, gl_order: int = 32, h_u: float = 0.25,
                  max_terms: int = 10**6, block: int = 1024, cap: int = 256):
    """Vectorized exp(xi) * Re K_{N + 2ik}(xi).

    Returns (values, error estimates, series terms used). Points with
    ``|k| < 1e-9`` are evaluated on the real-order axis.
    """
    N = abs(int(N))
    k = np.abs(np.asarray(k, dtype=float))
    xi = np.asarray(xi, dtype=float)
    k, xi = np.broadcast_arrays(k, xi)
    shape = k.shape
    k = k.ravel()
    xi = xi.ravel()
    if np.any(xi <= 0) or not np.all(np.isfinite(xi)):
        raise ValueError("xi must be positive and finite")
    val = np.empty(k.size)
    err = np.zeros(k.size)
    terms = np.ones(k.size, dtype=np.int64)

    axis = k < K_AXIS_THRESHOLD
    if axis.any():
        val[axis] = _axis_scaled(N, xi[axis], gl_order=gl_order, h_u=h_u)
        err[axis] = 1e-15 * np.abs(val[axis])
    idx = np.nonzero(~axis)[0]
    idx = idx[np.argsort(k[idx], kind="stable")]
    for start in range(0, idx.size, block):
        sel = idx[start:start + block]
        v, e, t, ok = _series_block(N, k[sel], xi[sel], tol, gl_order, h_u, max_terms, cap)
        if not ok.all():
            bad = sel[~ok]
            warnings.warn(f"sign-stability violated at {bad.size} point(s); using quadrature oracle",
                          RuntimeWarning, stacklevel=2)
            for i in range(bad.size):
                j = np.nonzero(sel == bad[i])[0][0]
                v[j] = math.exp(xi[bad[i]]) * knu_oracle(ComplexOrder(N, k[bad[i]]), xi[bad[i]])
        val[sel] = v
        err[sel] = e
        terms[sel] = t
    return val.reshape(shape), err.reshape(shape), terms.reshape(shape)


# ---------------------------------------------------------------------------
# public scalar entry points


def knu_series(order: ComplexOrder, xi: float, tol: float = DEFAULT_TOL, gl_order: int = 32,
               max_terms: int = 10**6) -> KnuResult:
    """Re K_nu(xi) by the sign-stable folded series."""
    if not (0 < tol <= 1e-3):
        raise ValueError("tol must lie in (0, 1e-3]")
    if abs(order.k) < K_AXIS_THRESHOLD:
        return KnuResult(knu_axis(abs(order.N), xi), 0.0, 1)
    v, e, t = re_knu_scaled(order.N, order.k, xi, tol=tol, gl_order=gl_order, max_terms=max_terms)
    scale = math.exp(-xi)
    return KnuResult(float(v) * scale, float(e) * scale, int(t))


def knu_axis(N: int, xi: float) -> float:
    """K_N(xi) = int_0^inf exp(-xi cosh u) cosh(N u) du by adaptive quadrature."""
    if xi <= 0:
        raise ValueError("xi must be positive")
    N = abs(int(N))
    u_end = float(_support_end(N, np.array([0.5]), np.array([xi]), np.array([0.0]))[0])
    u_pk = float(np.arccosh(last_extremum_y(N, np.array([xi]))[0]))
    u_end += u_pk

    def g(u):
        return math.exp(-2.0 * xi * math.sinh(0.5 * u) ** 2 + N * u) * 0.5 * (1.0 + math.exp(-2.0 * N * u))

    pts = [u_pk] if 0.0 < u_pk < u_end else None
    val, _ = integrate.quad(g, 0.0, u_end, epsabs=0.0, epsrel=1e-13, limit=500, points=pts)
    return val * math.exp(-xi)


def knu_oracle(order: ComplexOrder, xi: float, return_flag: bool = False):
    """Re K_nu(xi) by direct adaptive quadrature of the tau integral.

    The integral is split at tau = 1 and each half mapped to u >= 0 by
    tau = exp(+-u); the cosine factor is handled by QUADPACK's Fourier weight.
    With ``return_flag`` a ``(value, converged)`` pair is returned.
    """
    if xi <= 0:
        raise ValueError("xi must be positive")
    N = int(order.N)
    w = 2.0 * abs(order.k)
    u_pk = float(np.arccosh(last_extremum_y(abs(N), np.array([xi]))[0]))
    u_end = float(_support_end(abs(N), np.array([0.5]), np.array([xi]), np.array([u_pk]))[0])
    total = 0.0
    converged = True
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        for sign in (1.0, -1.0):  # tau > 1 and tau < 1
            def g(u, sign=sign):
                return 0.5 * math.exp(-2.0 * xi * math.sinh(0.5 * u) ** 2 + sign * N * u)
            if w == 0.0:
                part, _ = integrate.quad(g, 0.0, u_end, epsabs=1e-15, epsrel=1e-13, limit=500)
            else:
                part, _ = integrate.quad(g, 0.0, u_end, weight="cos", wvar=w, epsabs=1e-15, epsrel=1e-13,
                                         limit=2000)
            total += part
    for c in caught:
        # roundoff notices are expected when the result is far below the integrand scale
        if issubclass(c.category, integrate.IntegrationWarning) and "roundoff" not in str(c.message):
            converged = False
    value = total * math.exp(-xi)
    return (value, converged) if return_flag else value


# ---------------------------------------------------------------------------
# Wigner function


def _log_b(lam: float, n: int, j: int) -> tuple[float, float]:
    """(log|b|, sign) for b(lam, n, j) = C(2 lam - n - 1, n - j) (-1)^j / j!."""
    return log_binom(2.0 * lam - n - 1.0, n - j) - float(gammaln(j + 1.0)), (-1.0) ** j


def wdf_values(params: MorseParams, n: int, q, p, tol: float = DEFAULT_TOL, symmetrize: bool = True,
               **kw):
    """Vectorized Wigner function rho_n(q, p) in units of 1/hbar."""
    _check_level(params, n)
    lam = params.lam
    q, p = np.broadcast_arrays(np.asarray(q, dtype=float), np.asarray(p, dtype=float))
    log_xi = math.log(2.0 * lam) - q
    xi = np.exp(log_xi)
    base = math.log(2.0 / math.pi) + 2.0 * log_norm(params, n) + (2 * lam - 2 * n - 1) * log_xi - xi
    cache = {}

    def reK(N):
        N = abs(N)
        if N not in cache:
            cache[N] = re_knu_scaled(N, p, xi, tol=tol, **kw)[0]
        return cache[N]

    out = np.zeros(q.shape)
    lb = [_log_b(lam, n, j) for j in range(n + 1)]
    pairs = [(r, s) for r in range(n + 1) for s in range(n + 1)]
    if symmetrize:
        pairs = [(r, s) for r in range(n + 1) for s in range(r, n + 1)]
    for r, s in pairs:
        mult = 2.0 if symmetrize and r != s else 1.0
        lr, sr = lb[r]
        ls, ss = lb[s]
        with np.errstate(over="ignore", under="ignore"):
            out += mult * sr * ss * np.exp(base + lr + ls + (r + s) * log_xi) * reK(s - r)
    return out if out.ndim else float(out)


def wdf(params: MorseParams, n: int, point: PhasePoint, tol: float = DEFAULT_TOL) -> WdfSample:
    return WdfSample(point, float(wdf_values(params, n, point.q, point.p, tol=tol)))


def wdf_marginal_position(params: MorseParams, n: int, q, p_max: float, dp: float, tol: float = DEFAULT_TOL):
    """int rho(q, p) dp over [-p_max, p_max] by the trapezoid rule."""
    m = int(round(p_max / dp))
    p = np.linspace(-p_max, p_max, 2 * m + 1)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    rho = wdf_values(params, n, q[:, None], p[None, :], tol=tol)
    edge = np.max(np.abs(rho[:, [0, -1]]))
    if edge > 1e-10:
        warnings.warn(f"momentum cutoff p_max={p_max} too small: |rho| = {edge:.3g} at the boundary",
                      RuntimeWarning, stacklevel=2)
    out = integrate.trapezoid(rho, p, axis=1)
    return out if out.size > 1 else float(out[0])


def position_density(params: MorseParams, n: int, q):
    return np.asarray(wavefunction(params, n, q)) ** 2
