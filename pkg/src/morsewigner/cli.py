"""Command-line front end.

Exit status: 0 success, 1 verification or evaluation failure, 2 invalid
configuration. Settings resolve as flags > config file > defaults.
"""
from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np
import yaml

from . import __version__
from .grid import (DEFAULT_LEVELS, DEFAULT_WINDOW, GridEvaluationError, LevelMissingError, compare_level_sets,
                   extract_levels, locate_peak, sample_grid)
from .sdf import SdfConvergenceError, cached_profile
from .spectrum import MorseParams, num_levels, potential, spectrum
from .verify import run_checks
from .wigner import KnuConvergenceError
from .writers import dumps_json, grid_csv, grid_gnuplot, grid_json, table_csv, table_json

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    lambdas: tuple = (1.0, 2.0, 4.0, 10.0)
    n: int = 0
    q_min: float = DEFAULT_WINDOW[0]
    q_max: float = DEFAULT_WINDOW[1]
    p_min: float = DEFAULT_WINDOW[2]
    p_max: float = DEFAULT_WINDOW[3]
    resolution: int = 400
    levels: tuple = DEFAULT_LEVELS
    tol: float = 1e-10
    quad_points: int = 256
    norm_tol: float = 1e-3
    format: str = "csv"
    output: str | None = None
    gnuplot: bool = False
    profile: bool = False

    @property
    def window(self) -> tuple[float, float, float, float]:
        return (self.q_min, self.q_max, self.p_min, self.p_max)

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        d["lambda"] = list(d.pop("lambdas"))
        d["levels"] = list(d["levels"])
        return d

    def validate(self) -> "RunConfig":
        for lam in self.lambdas:
            if not (math.isfinite(lam) and lam > 0.5):
                raise ConfigError(f"lambda={lam}: need lambda > 1/2 for a bound state")
            if not (0 <= self.n < num_levels(MorseParams(lam))):
                raise ConfigError(f"n={self.n} outside 0..{num_levels(MorseParams(lam)) - 1} for lambda={lam}")
        if not self.lambdas:
            raise ConfigError("empty lambda list")
        if not (self.q_min < self.q_max and self.p_min < self.p_max):
            raise ConfigError(f"degenerate window {self.window}")
        if self.resolution < 32:
            raise ConfigError("resolution must be >= 32")
        if not (0.0 < self.tol <= 1e-3):
            raise ConfigError("tol must lie in (0, 1e-3]")
        if self.quad_points < 16:
            raise ConfigError("quad-points must be >= 16")
        if not self.norm_tol > 0:
            raise ConfigError("norm-tol must be positive")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        return self


_FIELDS = {f.name for f in dataclasses.fields(RunConfig)} - {"command"}


def _float_list(v) -> tuple:
    if isinstance(v, str):
        v = [s for s in v.replace(" ", "").split(",") if s]
    if not isinstance(v, (list, tuple)):
        v = [v]
    try:
        return tuple(float(x) for x in v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"not a number list: {v!r}") from exc


def _coerce(key: str, value):
    if key in ("lambdas", "levels"):
        return _float_list(value)
    types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    t = types[key]
    try:
        if t == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if t == "float":
            return float(value)
        if t == "bool":
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return None if value is None else str(value)


def load_config_file(path) -> dict:
    """Flat key-value document (YAML or JSON); keys may use dashes or underscores."""
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError("config file must be a flat key-value mapping")
    out = {}
    for k, v in raw.items():
        key = str(k).replace("-", "_")
        key = "lambdas" if key == "lambda" else key
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {k!r}")
        if isinstance(v, dict):
            raise ConfigError(f"config key {k!r} is nested; only flat mappings are accepted")
        out[key] = _coerce(key, v)
    return out


def resolve_config(command: str, flags: dict, config_path=None) -> RunConfig:
    values = load_config_file(config_path) if config_path else {}
    for k, v in flags.items():
        if v is not None:
            values[k] = _coerce(k, v)
    return RunConfig(command, **values).validate()


# ---------------------------------------------------------------------------
# output


def _meta(cfg: RunConfig, **extra) -> dict:
    meta = {"tool": "morsewigner", "version": __version__, "command": cfg.command, "config": cfg.echo(),
            "units": "hbar=m=a=1; Q=sqrt(lambda) q, P=p/sqrt(lambda); energies in hbar*omega0; "
                     "densities in 1/hbar"}
    meta.update(extra)
    return meta


def _emit(text: str, path: str | None):
    if path is None:
        click.echo(text, nl=False)
    else:
        Path(path).write_text(text)


def _table(cfg: RunConfig, meta: dict, columns, rows, path=None):
    text = (table_json if cfg.format == "json" else table_csv)(meta, columns, rows)
    _emit(text, path if path is not None else cfg.output)


def _per_lambda_path(cfg: RunConfig, lam: float) -> str | None:
    if cfg.output is None or len(cfg.lambdas) == 1:
        return cfg.output
    p = Path(cfg.output)
    return str(p.with_name(f"{p.stem}_lambda{lam:g}{p.suffix}"))


def _geometry(grid) -> dict:
    return {"q_range": list(grid.q_range), "p_range": list(grid.p_range), "nq": grid.nq, "np": grid.np,
            "layout": "values[i][j] at (Q_i, P_j)"}


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(cfg: RunConfig):
    rows = [(lam, lv.n, lv.eps, lv.energy) for lam in cfg.lambdas for lv in spectrum(MorseParams(lam))]
    meta = _meta(cfg, **{"lambda": list(cfg.lambdas), "n": "all bound levels",
                         "levels_per_lambda": [num_levels(MorseParams(lam)) for lam in cfg.lambdas]})
    _table(cfg, meta, ["lambda", "n", "eps_n", "E_n"], rows)


def cmd_potential(cfg: RunConfig):
    Q = np.linspace(cfg.q_min, cfg.q_max, cfg.resolution)
    rows, markers = [], {}
    for lam in cfg.lambdas:
        params = MorseParams(lam)
        V = potential(Q, params)
        rows += [(lam, q, v) for q, v in zip(Q, V)]
        markers[f"{lam:g}"] = [lv.energy for lv in spectrum(params)]
    meta = _meta(cfg, **{"lambda": list(cfg.lambdas), "n": "all bound levels", "level_energies": markers,
                         "geometry": {"q_range": [cfg.q_min, cfg.q_max], "nq": cfg.resolution}})
    _table(cfg, meta, ["lambda", "Q", "V"], rows)


def _grid_summary(grid) -> dict:
    Qp, Pp, vp = locate_peak(grid)
    return {"max": float(grid.values.max()), "min": float(grid.values.min()), "peak": [Qp, Pp, vp]}


def cmd_grid(cfg: RunConfig, kind: str):
    for lam in cfg.lambdas:
        params = MorseParams(lam)
        path = _per_lambda_path(cfg, lam)
        if kind == "sdf" and cfg.profile:
            prof = cached_profile(lam, cfg.n, cfg.quad_points, cfg.tol)
            e_pk, r_pk = prof.peak()
            meta = _meta(cfg, **{"lambda": lam, "n": cfg.n, "max": r_pk, "max_at_eps": e_pk,
                                 "max_at_E": e_pk * lam / 2.0, "origin_value": float(prof.rho_c[0])})
            rows = [(e, e * lam / 2.0, r, int(m)) for e, r, m in zip(prof.eps_grid, prof.rho_c, prof.points_used)]
            _table(cfg, meta, ["eps", "E", "rho_c", "orbit_points"], rows, path)
            click.echo(f"lambda={lam:g}: rho_c(0)={prof.rho_c[0]:.6f} max={r_pk:.6f} at E={e_pk * lam / 2:.4f}",
                       err=True)
            continue
        grid = sample_grid(kind, params, cfg.n, cfg.window, cfg.resolution, tol=cfg.tol, quad_points=cfg.quad_points)
        summary = _grid_summary(grid)
        meta = _meta(cfg, **{"lambda": lam, "n": cfg.n, "kind": kind, "geometry": _geometry(grid), **summary})
        if cfg.gnuplot:
            text = grid_gnuplot(meta, grid.Q, grid.P, grid.values)
        elif cfg.format == "json":
            text = grid_json(meta, grid.Q, grid.P, grid.values)
        else:
            text = grid_csv(meta, grid.Q, grid.P, grid.values)
        _emit(text, path)
        click.echo(f"lambda={lam:g} {kind}: max={summary['max']:.6g} min={summary['min']:.6g} "
                   f"peak=({summary['peak'][0]:.4f}, {summary['peak'][1]:.4f})", err=True)


COMPARE_COLUMNS = ["lambda", "level", "present", "area_wdf", "area_sdf", "area_sym_diff", "discrepancy",
                   "centroid_wdf_Q", "centroid_wdf_P", "centroid_sdf_Q", "centroid_sdf_P", "shift_Q", "shift_P"]
OVERLAY_COLUMNS = ["lambda", "kind", "level", "curve", "closed", "vertex", "Q", "P"]


def compare_rows(cfg: RunConfig):
    """(table rows, overlay rows, mean discrepancy per lambda over positive levels present everywhere)."""
    table, overlay, disc = [], [], {}
    for lam in cfg.lambdas:
        params = MorseParams(lam)
        grids = {k: sample_grid(k, params, cfg.n, cfg.window, cfg.resolution, tol=cfg.tol,
                                quad_points=cfg.quad_points) for k in ("wdf", "sdf")}
        disc[lam] = {}
        for level in cfg.levels:
            try:
                r = compare_level_sets(grids["wdf"], grids["sdf"], level)
            except LevelMissingError:
                table.append((lam, level, False) + (math.nan,) * (len(COMPARE_COLUMNS) - 3))
                continue
            disc[lam][level] = r.discrepancy
            table.append((lam, level, True, r.area_wdf, r.area_sdf, r.area_sym_diff, r.discrepancy,
                          *r.centroid_wdf, *r.centroid_sdf, *r.displacement))
        for kind, g in grids.items():
            for ls in extract_levels(g, cfg.levels):
                for c, (pts, closed) in enumerate(zip(ls.polylines, ls.closed)):
                    overlay += [(lam, kind, ls.level, c, closed, v, x, y) for v, (x, y) in enumerate(pts)]
    common = [lv for lv in cfg.levels if lv > 0 and all(lv in d for d in disc.values())]
    means = {f"{lam:g}": (float(np.mean([disc[lam][lv] for lv in common])) if common else math.nan)
             for lam in cfg.lambdas}
    return table, overlay, means, common


def cmd_compare(cfg: RunConfig):
    table, overlay, means, common = compare_rows(cfg)
    meta = _meta(cfg, **{"lambda": list(cfg.lambdas), "n": cfg.n, "mean_discrepancy": means,
                         "mean_over_levels": common,
                         "geometry": {"q_range": [cfg.q_min, cfg.q_max], "p_range": [cfg.p_min, cfg.p_max],
                                      "nq": cfg.resolution, "np": cfg.resolution}})
    if cfg.format == "json":
        data = {"columns": COMPARE_COLUMNS, "rows": [list(r) for r in table],
                "level_sets": {"columns": OVERLAY_COLUMNS, "rows": [list(r) for r in overlay]}}
        _emit(dumps_json({"meta": meta, "data": data}) + "\n", cfg.output)
    else:
        _table(cfg, meta, COMPARE_COLUMNS, table)
        if cfg.output is not None:
            p = Path(cfg.output)
            _emit(table_csv(meta, OVERLAY_COLUMNS, overlay), str(p.with_name(f"{p.stem}.levels.csv")))
    for lam, m in means.items():
        click.echo(f"lambda={lam}: mean discrepancy {m:.6g} over levels {common}", err=True)


def cmd_verify(cfg: RunConfig) -> int:
    results = run_checks(cfg.lambdas, cfg.n, cfg.resolution, cfg.norm_tol, knu_tol=cfg.tol)
    rows = [(r.name, "" if r.lam is None else r.lam, r.passed, r.value, r.tol, r.detail) for r in results]
    ok = all(r.passed for r in results)
    meta = _meta(cfg, **{"lambda": list(cfg.lambdas), "n": cfg.n, "all_passed": ok})
    _table(cfg, meta, ["check", "lambda", "passed", "deviation", "tolerance", "detail"], rows)
    for r in results:
        lam = "" if r.lam is None else f" lambda={r.lam:g}"
        click.echo(f"{'PASS' if r.passed else 'FAIL'} {r.name}{lam}: {r.value:.3g} (tol {r.tol:g})", err=True)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# click wiring


def _options(f):
    opts = [
        click.option("--lambda", "lambdas", default=None, help="Comma-separated well parameters (default 1,2,4,10)."),
        click.option("--n", type=int, default=None, help="Level index."),
        click.option("--q-min", type=float, default=None),
        click.option("--q-max", type=float, default=None),
        click.option("--p-min", type=float, default=None),
        click.option("--p-max", type=float, default=None),
        click.option("--resolution", type=int, default=None, help="Lattice points per axis."),
        click.option("--levels", default=None, help="Comma-separated density levels."),
        click.option("--tol", type=float, default=None, help="Relative tolerance of the K series."),
        click.option("--quad-points", type=int, default=None, help="Initial orbit-average points."),
        click.option("--format", "format", type=click.Choice(["csv", "json"]), default=None),
        click.option("--output", "-o", default=None, help="Output file (stdout if omitted)."),
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="Flat YAML/JSON key-value file."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _run(command: str, flags: dict, body):
    config_path = flags.pop("config_path", None)
    try:
        cfg = resolve_config(command, flags, config_path)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        code = body(cfg)
    except (GridEvaluationError, KnuConvergenceError, SdfConvergenceError) as exc:
        click.echo(f"evaluation failed: {exc}", err=True)
        sys.exit(EXIT_FAIL)
    sys.exit(code or EXIT_OK)


@click.group()
@click.version_option(__version__)
def main():
    """Wigner and semiclassical phase-space densities of Morse oscillator states."""


@main.command("spectrum")
@_options
def spectrum_cmd(**flags):
    """Bound levels: n, eps_n = E_n / D and E_n in units of hbar*omega0."""
    _run("spectrum", flags, cmd_spectrum)


@main.command("potential")
@_options
def potential_cmd(**flags):
    """V(Q) over the Q window, with level energies in the header."""
    _run("potential", flags, cmd_potential)


@main.command("wdf")
@_options
@click.option("--gnuplot", is_flag=True, default=None, help="Whitespace matrix instead of CSV/JSON.")
def wdf_cmd(**flags):
    """Wigner function lattice over the (Q, P) window."""
    _run("wdf", flags, lambda cfg: cmd_grid(cfg, "wdf"))


@main.command("sdf")
@_options
@click.option("--gnuplot", is_flag=True, default=None, help="Whitespace matrix instead of CSV/JSON.")
@click.option("--profile", is_flag=True, default=None, help="Emit rho_c(eps) instead of a lattice.")
def sdf_cmd(**flags):
    """Semiclassical density lattice, or its energy profile with --profile."""
    _run("sdf", flags, lambda cfg: cmd_grid(cfg, "sdf"))


@main.command("compare")
@_options
def compare_cmd(**flags):
    """Per-level WDF/SDF discrepancy table plus paired level-set overlay.

    In CSV mode the overlay goes to <stem>.levels.csv next to --output.
    """
    _run("compare", flags, cmd_compare)


@main.command("verify")
@_options
@click.option("--norm-tol", type=float, default=None, help="Normalization tolerance (default 1e-3).")
def verify_cmd(**flags):
    """Run the invariant suite; exit status 1 if any check fails."""
    _run("verify", flags, cmd_verify)


if __name__ == "__main__":
    main()
