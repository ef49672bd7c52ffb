"""Phase-space lattices of rho / rho_c, constant-density curves and the
WDF-versus-SDF comparison diagnostics.

Grids live in the scaled coordinates Q = sqrt(lam) q, P = p / sqrt(lam); since
dQ dP = dq dp the density values need no rescaling.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classical import energy_ratio
from .sdf import SdfProfile, cached_profile
from .spectrum import MorseParams, _check_level, wavefunction
from .wigner import DEFAULT_TOL, wdf_values

DEFAULT_WINDOW = (-4.0, 8.0, -5.0, 5.0)
DEFAULT_RESOLUTION = 400
DEFAULT_LEVELS = (0.3, 0.25, 0.2, 0.15, 0.1, 0.05, 0.0)
WORKERS_ENV = "MORSEWIGNER_WORKERS"


class GridEvaluationError(RuntimeError):
    pass


class LevelMissingError(ValueError):
    pass


@dataclass(frozen=True)
class DensityGrid:
    q_range: tuple[float, float]
    p_range: tuple[float, float]
    values: np.ndarray  # shape (nq, np): values[i, j] at (Q_i, P_j)
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("wdf", "sdf"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.values.ndim != 2:
            raise ValueError("grid values must be two-dimensional")

    @property
    def nq(self) -> int:
        return self.values.shape[0]

    @property
    def np(self) -> int:
        return self.values.shape[1]

    @property
    def Q(self) -> np.ndarray:
        return np.linspace(*self.q_range, self.nq)

    @property
    def P(self) -> np.ndarray:
        return np.linspace(*self.p_range, self.np)

    @property
    def dQ(self) -> float:
        return (self.q_range[1] - self.q_range[0]) / (self.nq - 1)

    @property
    def dP(self) -> float:
        return (self.p_range[1] - self.p_range[0]) / (self.np - 1)

    def mesh(self):
        return np.meshgrid(self.Q, self.P, indexing="ij")

    def congruent(self, other: "DensityGrid") -> bool:
        return (self.values.shape == other.values.shape and np.allclose(self.q_range, other.q_range)
                and np.allclose(self.p_range, other.p_range))


def trapezoid_weights(grid: DensityGrid) -> np.ndarray:
    wq = np.full(grid.nq, grid.dQ)
    wq[[0, -1]] *= 0.5
    wp = np.full(grid.np, grid.dP)
    wp[[0, -1]] *= 0.5
    return wq[:, None] * wp[None, :]


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _wdf_rows(lam, n, Q, P, tol):
    s = math.sqrt(lam)
    return wdf_values(MorseParams(lam), n, (Q / s)[:, None], (P * s)[None, :], tol=tol)


def sample_grid(kind: str, params: MorseParams, n: int = 0, window=DEFAULT_WINDOW,
                resolution=DEFAULT_RESOLUTION, profile: SdfProfile | None = None, tol: float = DEFAULT_TOL,
                quad_points: int = 256, workers: int | None = None) -> DensityGrid:
    """Deterministic lattice of rho (``kind='wdf'``) or rho_c (``kind='sdf'``)."""
    _check_level(params, n)
    nq, npp = (resolution, resolution) if np.isscalar(resolution) else map(int, resolution)
    if nq < 32 or npp < 32:
        raise ValueError("resolution must be >= 32 per axis")
    qmin, qmax, pmin, pmax = map(float, window)
    if not (qmin < qmax and pmin < pmax):
        raise ValueError(f"degenerate window {window!r}")
    Q = np.linspace(qmin, qmax, nq)
    P = np.linspace(pmin, pmax, npp)
    meta = {"lambda": params.lam, "n": n, "units": "1/hbar", "coordinates": "Q=sqrt(lambda)*q, P=p/sqrt(lambda)"}
    if kind == "wdf":
        workers = worker_count() if workers is None else workers
        chunks = np.array_split(np.arange(nq), max(1, min(workers * 4, nq))) if workers > 1 else [np.arange(nq)]
        try:
            if workers > 1:
                with ProcessPoolExecutor(max_workers=workers) as ex:
                    parts = list(ex.map(_wdf_rows, [params.lam] * len(chunks), [n] * len(chunks),
                                        [Q[c] for c in chunks], [P] * len(chunks), [tol] * len(chunks)))
            else:
                parts = [_wdf_rows(params.lam, n, Q, P, tol)]
        except Exception as exc:  # attach the lattice location
            raise GridEvaluationError(f"WDF evaluation failed on Q in [{qmin}, {qmax}], "
                                      f"P in [{pmin}, {pmax}]: {exc}") from exc
        values = np.concatenate(parts, axis=0)
        bad = ~np.isfinite(values)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise GridEvaluationError(f"non-finite rho at Q={Q[i]:.6g}, P={P[j]:.6g}")
    elif kind == "sdf":
        if profile is None:
            profile = cached_profile(params.lam, n, quad_points, tol)
        elif profile.lam != params.lam or profile.n != n:
            raise ValueError("profile does not match (lambda, n)")
        s = math.sqrt(params.lam)
        eps = energy_ratio((Q / s)[:, None], (P * s)[None, :], params)
        values = np.where(eps >= 1.0, 0.0, profile(eps))
        meta["profile_points"] = int(profile.eps_grid.size)
    else:
        raise ValueError(f"unknown grid kind {kind!r}")
    return DensityGrid((qmin, qmax), (pmin, pmax), values, kind, meta)


def support_window(params: MorseParams, n: int = 0, rel_tail: float = 1e-14) -> tuple[float, float, float, float]:
    """Scaled window holding all but a negligible part of the state.

    Position limits come from the tails of |psi_n|^2; the momentum half-width
    covers both the Gaussian core (width ~sqrt(lam)) and the exp(-pi p)
    decay of the Bessel-type kernel.
    """
    s = math.sqrt(params.lam)
    q = np.linspace(-10.0, 60.0, 70001)
    dens = np.asarray(wavefunction(params, n, q)) ** 2
    keep = np.nonzero(dens > rel_tail * dens.max())[0]
    q_lo, q_hi = q[keep[0]] - 0.25, q[keep[-1]] + 0.25
    p_max = max(12.0, 7.5 * s)
    return (q_lo * s, q_hi * s, -p_max / s, p_max / s)


# ---------------------------------------------------------------------------
# level sets


@dataclass
class LevelSet:
    level: float
    polylines: list = field(default_factory=list)  # each an (m, 2) array of (Q, P)
    closed: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.polylines)

    @property
    def closed_count(self) -> int:
        return int(sum(self.closed))


def _edge_point(key, values, Q, P, level):
    kind, i, j = key
    if kind == "q":  # (i, j) -> (i + 1, j)
        v0, v1 = values[i, j], values[i + 1, j]
        t = (level - v0) / (v1 - v0)
        return (Q[i] + t * (Q[i + 1] - Q[i]), P[j])
    v0, v1 = values[i, j], values[i, j + 1]
    t = (level - v0) / (v1 - v0)
    return (Q[i], P[j] + t * (P[j + 1] - P[j]))


def _cell_segments(values, level):
    """Marching squares: list of (edge_key, edge_key) segments."""
    b = values >= level
    c0 = b[:-1, :-1]
    c1 = b[1:, :-1]
    c2 = b[1:, 1:]
    c3 = b[:-1, 1:]
    case = c0.astype(np.int8) | (c1 << 1) | (c2 << 2) | (c3 << 3)
    cells = np.argwhere((case != 0) & (case != 15))
    segs = []
    for i, j in cells:
        cs = int(case[i, j])
        e = {0: ("q", i, j), 1: ("p", i + 1, j), 2: ("q", i, j + 1), 3: ("p", i, j)}
        if cs in (5, 10):
            center = 0.25 * (values[i, j] + values[i + 1, j] + values[i + 1, j + 1] + values[i, j + 1])
            joined = center >= level
            # which corners are cut off: cut the outside ones when the inside ones connect
            if (cs == 5) == joined:
                segs += [(e[0], e[1]), (e[2], e[3])]  # around corners 1 and 3
            else:
                segs += [(e[3], e[0]), (e[1], e[2])]  # around corners 0 and 2
            continue
        bits = [(cs >> k) & 1 for k in range(4)]
        crossing = [k for k, (a, bb) in enumerate([(0, 1), (1, 2), (3, 2), (0, 3)]) if bits[a] != bits[bb]]
        segs.append((e[crossing[0]], e[crossing[1]]))
    return segs


def _chain(segs):
    """Join segments sharing edge keys into polylines of edge keys."""
    adj: dict = {}
    for idx, (a, b) in enumerate(segs):
        adj.setdefault(a, []).append(idx)
        adj.setdefault(b, []).append(idx)
    used = np.zeros(len(segs), dtype=bool)
    chains = []

    def walk(start_key, first_seg):
        keys = [start_key]
        seg = first_seg
        key = start_key
        while seg is not None:
            used[seg] = True
            a, b = segs[seg]
            key = b if a == key else a
            keys.append(key)
            nxt = [s for s in adj[key] if not used[s]]
            seg = nxt[0] if nxt else None
        return keys

    # open chains start at keys with a single incident segment (grid boundary)
    for key, lst in adj.items():
        if len(lst) == 1 and not used[lst[0]]:
            chains.append((walk(key, lst[0]), False))
    for idx in range(len(segs)):
        if not used[idx]:
            keys = walk(segs[idx][0], idx)
            chains.append((keys, keys[0] == keys[-1]))
    return chains


def extract_levels(grid: DensityGrid, levels) -> list[LevelSet]:
    """Constant-value curves of the grid; saddles resolved by the cell-centre value."""
    Q, P = grid.Q, grid.P
    v = grid.values
    vmin, vmax = float(v.min()), float(v.max())
    half_cell = 0.5 * math.hypot(grid.dQ, grid.dP)

    def on_edge(pt):
        return (np.isclose(pt[0], Q[0]) or np.isclose(pt[0], Q[-1]) or np.isclose(pt[1], P[0])
                or np.isclose(pt[1], P[-1]))
    out = []
    for level in np.atleast_1d(levels):
        level = float(level)
        ls = LevelSet(level)
        if vmin < level <= vmax:
            for keys, closed in _chain(_cell_segments(v, level)):
                pts = np.array([_edge_point(k, v, Q, P, level) for k in keys])
                # chains ending on the window edge stay open however close their ends are
                if (not closed and len(pts) > 2 and np.hypot(*(pts[0] - pts[-1])) < half_cell
                        and not (on_edge(pts[0]) and on_edge(pts[-1]))):
                    closed = True
                ls.polylines.append(pts)
                ls.closed.append(bool(closed))
        out.append(ls)
    return out


def bilinear(grid: DensityGrid, Qx, Px):
    """Bilinear interpolant of the grid at scattered points."""
    fi = np.clip((np.asarray(Qx) - grid.q_range[0]) / grid.dQ, 0, grid.nq - 1 - 1e-12)
    fj = np.clip((np.asarray(Px) - grid.p_range[0]) / grid.dP, 0, grid.np - 1 - 1e-12)
    i = np.floor(fi).astype(int)
    j = np.floor(fj).astype(int)
    s, t = fi - i, fj - j
    v = grid.values
    return ((1 - s) * (1 - t) * v[i, j] + s * (1 - t) * v[i + 1, j]
            + s * t * v[i + 1, j + 1] + (1 - s) * t * v[i, j + 1])


# ---------------------------------------------------------------------------
# comparison diagnostics


def _triangle_parts(v, x, y, level):
    """Area fraction and centroid of {f >= level} for linear f on triangles.

    ``v``, ``x``, ``y`` have shape (3, ...): vertex values and coordinates.
    """
    order = np.argsort(v, axis=0, kind="stable")
    v1, v2, v3 = np.take_along_axis(v, order, axis=0)
    x1, x2, x3 = np.take_along_axis(x, order, axis=0)
    y1, y2, y3 = np.take_along_axis(y, order, axis=0)
    cx_full = (x1 + x2 + x3) / 3.0
    cy_full = (y1 + y2 + y3) / 3.0
    with np.errstate(divide="ignore", invalid="ignore"):
        # high case: small triangle at the top vertex
        ta = (v3 - level) / (v3 - v1)
        tb = (v3 - level) / (v3 - v2)
        hi_frac = ta * tb
        hi_cx = x3 + (ta * (x1 - x3) + tb * (x2 - x3)) / 3.0
        hi_cy = y3 + (ta * (y1 - y3) + tb * (y2 - y3)) / 3.0
        # low case: full triangle minus the small triangle at the bottom vertex
        sa = (level - v1) / (v2 - v1)
        sb = (level - v1) / (v3 - v1)
        cut = sa * sb
        lo_frac = 1.0 - cut
        cut_cx = x1 + (sa * (x2 - x1) + sb * (x3 - x1)) / 3.0
        cut_cy = y1 + (sa * (y2 - y1) + sb * (y3 - y1)) / 3.0
        lo_cx = (cx_full - cut * cut_cx) / lo_frac
        lo_cy = (cy_full - cut * cut_cy) / lo_frac
    full = level <= v1
    empty = level >= v3
    low = ~full & ~empty & (level <= v2)
    high = ~full & ~empty & ~low
    frac = np.select([full, low, high], [1.0, lo_frac, hi_frac], 0.0)
    cx = np.select([full, low, high], [cx_full, lo_cx, hi_cx], 0.0)
    cy = np.select([full, low, high], [cy_full, lo_cy, hi_cy], 0.0)
    return frac, cx, cy


def superlevel_region(values, dQ, dP, Q, P, level):
    """(area, centroid) of {f >= level} for the piecewise-linear interpolant on split cells."""
    nq, npp = values.shape
    QQ = np.broadcast_to(np.asarray(Q)[:, None], (nq, npp))
    PP = np.broadcast_to(np.asarray(P)[None, :], (nq, npp))
    corners = [(slice(None, -1), slice(None, -1)), (slice(1, None), slice(None, -1)),
               (slice(1, None), slice(1, None)), (slice(None, -1), slice(1, None))]
    v = [values[c] for c in corners]
    x = [QQ[c] for c in corners]
    y = [PP[c] for c in corners]
    half = 0.5 * dQ * dP
    area, mq, mp = 0.0, 0.0, 0.0
    for tri in ((0, 1, 2), (0, 2, 3)):
        frac, cx, cy = _triangle_parts(np.stack([v[t] for t in tri]), np.stack([x[t] for t in tri]),
                                       np.stack([y[t] for t in tri]), level)
        a = frac * half
        area += float(a.sum())
        mq += float((a * cx).sum())
        mp += float((a * cy).sum())
    if area == 0.0:
        return 0.0, (math.nan, math.nan)
    return area, (mq / area, mp / area)


@dataclass(frozen=True)
class DiscrepancyReport:
    level: float
    area_wdf: float
    area_sdf: float
    area_sym_diff: float
    discrepancy: float  # symmetric difference / WDF area
    centroid_wdf: tuple
    centroid_sdf: tuple
    displacement: tuple  # SDF centroid minus WDF centroid


def compare_level_sets(wdf_grid: DensityGrid, sdf_grid: DensityGrid, level: float) -> DiscrepancyReport:
    """Normalized symmetric difference of the regions rho >= level and rho_c >= level."""
    if not wdf_grid.congruent(sdf_grid):
        raise ValueError("grids are not congruent")
    Q, P = wdf_grid.Q, wdf_grid.P
    dQ, dP = wdf_grid.dQ, wdf_grid.dP
    a_w, c_w = superlevel_region(wdf_grid.values, dQ, dP, Q, P, level)
    a_s, c_s = superlevel_region(sdf_grid.values, dQ, dP, Q, P, level)
    if a_w == 0.0 or a_s == 0.0:
        missing = "wdf" if a_w == 0.0 else "sdf"
        raise LevelMissingError(f"level {level} absent from the {missing} grid")
    a_both, _ = superlevel_region(np.minimum(wdf_grid.values, sdf_grid.values), dQ, dP, Q, P, level)
    sym = max(a_w + a_s - 2.0 * a_both, 0.0)
    disp = (c_s[0] - c_w[0], c_s[1] - c_w[1])
    return DiscrepancyReport(level, a_w, a_s, sym, sym / a_w, c_w, c_s, disp)


def locate_peak(grid: DensityGrid) -> tuple[float, float, float]:
    """Grid maximum refined by a least-squares quadratic on its 3x3 neighbourhood."""
    v = grid.values
    i, j = np.unravel_index(int(np.argmax(v)), v.shape)
    vmax = float(v[i, j])
    ties = np.argwhere(v >= vmax - 1e-12)
    # a mirror pair straddling P = 0 sits inside the fit stencil and is not a plateau
    far = np.max(np.abs(ties - [i, j]), axis=1) > 1
    if far.any():
        warnings.warn(f"{len(ties)} grid cells tie for the maximum within 1e-12", RuntimeWarning,
                      stacklevel=2)
    Q, P = grid.Q, grid.P
    if not (0 < i < grid.nq - 1 and 0 < j < grid.np - 1):
        return float(Q[i]), float(P[j]), vmax
    x, y = np.meshgrid([-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0], indexing="ij")
    x, y = x.ravel(), y.ravel()
    A = np.column_stack([np.ones(9), x, y, x * x, x * y, y * y])
    c = np.linalg.lstsq(A, v[i - 1:i + 2, j - 1:j + 2].ravel(), rcond=None)[0]
    H = np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]])
    if np.all(np.linalg.eigvalsh(H) < 0):
        dx, dy = np.linalg.solve(H, -c[1:3])
        if abs(dx) <= 1.0 and abs(dy) <= 1.0:
            val = c[0] + c[1] * dx + c[2] * dy + c[3] * dx * dx + c[4] * dx * dy + c[5] * dy * dy
            return float(Q[i] + dx * grid.dQ), float(P[j] + dy * grid.dP), float(val)
    return float(Q[i]), float(P[j]), vmax
