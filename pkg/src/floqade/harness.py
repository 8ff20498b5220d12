"""Adiabaticity sweeps: run, fit, export.

One row per adiabaticity value, an ordinary-least-squares power-law fit of
error against eps, optional accumulation-bound overlay, and CSV/SVG
artifacts.  Rows are mutually independent and aggregate in grid order, so
the pipeline is deterministic; the ``seed`` field is reserved.
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import bounds as bounds_mod
from .evolve import (
    EXP_MIDPOINT,
    METRICS,
    VECTOR_DEVIATION,
    PropagationConfig,
    adiabatic_error,
)
from .model import ModelSpec
from .spectral import LEFT, RIGHT, build_ledger
from .util import fmt_g15, geometric_grid


@dataclass(frozen=True)
class EpsGrid:
    eps_max: float
    eps_min: float
    points: int

    def __post_init__(self):
        if not (0 < self.eps_min < self.eps_max):
            raise ValueError("need 0 < eps_min < eps_max")
        if self.points < 4:
            raise ValueError("need at least 4 grid points")

    def values(self) -> np.ndarray:
        """Grid values, descending."""
        return geometric_grid(self.eps_max, self.eps_min, self.points)


@dataclass(frozen=True)
class SweepConfig:
    spec: ModelSpec
    eps_grid: EpsGrid
    s_window: tuple = (-0.45, 0.45)
    metric: str = VECTOR_DEVIATION
    bound_overlay: bool = False
    output_dir: Optional[str] = None
    seed: int = 0
    fit_range: Optional[tuple] = None  # (eps_lo, eps_hi); None fits all rows
    integrator: str = EXP_MIDPOINT
    c_step: float = 0.1
    ledger_k: Optional[tuple] = None  # (k_min, k_max) for the bound overlay

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if not (self.s_window[0] < self.s_window[1]):
            raise ValueError("s_window must be increasing")


@dataclass(frozen=True)
class SweepRow:
    eps: float
    error: float
    transition_prob: float
    steps: int
    wall_time: float
    flags: tuple = ()


@dataclass(frozen=True)
class BoundRow:
    eps: float
    K_minus: int
    K_plus: int
    bound_value: float


@dataclass(frozen=True)
class PowerLawFit:
    p_hat: float
    log_prefactor: float
    r_squared: float
    stderr_p: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    fit: Optional[PowerLawFit]
    bound_rows: tuple = ()
    fit_eps_range: Optional[tuple] = None
    notes: tuple = ()


def fit_power_law(rows: Sequence) -> PowerLawFit:
    """OLS of log(error) on log(eps) over unflagged, positive rows.

    Accepts SweepRow instances or (eps, error) pairs.  Returns slope,
    intercept (natural log), R^2 and the slope standard error.
    """
    pts = []
    for row in rows:
        if isinstance(row, SweepRow):
            if row.flags:
                continue
            pts.append((row.eps, row.error))
        else:
            pts.append((row[0], row[1]))
    pts = [(e, v) for e, v in pts if v > 0]
    if len(pts) < 4:
        raise ValueError("need at least 4 unflagged rows with positive error")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    n = x.size
    xbar, ybar = x.mean(), y.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - ybar)) / sxx)
    intercept = float(ybar - slope * xbar)
    resid = y - (intercept + slope * x)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - ybar) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    stderr = math.sqrt(ss_res / (n - 2) / sxx) if n > 2 else 0.0
    return PowerLawFit(p_hat=slope, log_prefactor=intercept,
                       r_squared=r_squared, stderr_p=stderr)


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """One adiabatic-error row per eps, with optional bound overlay.

    Per-row propagation failures and edge-leak flags exclude a row from
    the fit but do not abort the sweep.  Rows are ordered by descending
    eps and the output is deterministic for a fixed config.
    """
    eps_values = cfg.eps_grid.values()
    notes = []
    ledgers = None
    if cfg.bound_overlay:
        k_lo, k_hi = cfg.ledger_k or (4, max(6, min(cfg.spec.n_modes - 2, 20)))
        ledgers = (
            build_ledger(cfg.spec, k_lo, k_hi, LEFT),
            build_ledger(cfg.spec, k_lo, k_hi, RIGHT),
        )
        notes.append(f"bound overlay ledger k={k_lo}..{k_hi}")
    rows = []
    bound_rows = []
    for eps in eps_values:
        prop_cfg = PropagationConfig(
            eps=float(eps),
            s_start=cfg.s_window[0],
            s_end=cfg.s_window[1],
            integrator=cfg.integrator,
            c_step=cfg.c_step,
            metric=cfg.metric,
        )
        try:
            res = adiabatic_error(cfg.spec, prop_cfg)
        except Exception as exc:  # keep the sweep alive, exclude the row
            rows.append(SweepRow(eps=float(eps), error=math.nan,
                                 transition_prob=math.nan, steps=0,
                                 wall_time=0.0, flags=("failed",)))
            notes.append(f"eps={eps:g} failed: {exc}")
            continue
        error = (
            res.error_vector_deviation
            if cfg.metric == VECTOR_DEVIATION
            else res.transition_prob
        )
        rows.append(
            SweepRow(
                eps=float(eps),
                error=float(error),
                transition_prob=float(res.transition_prob),
                steps=res.steps,
                wall_time=res.wall_time,
                flags=res.flags,
            )
        )
        if ledgers is not None:
            try:
                rep = bounds_mod.accumulation_bound(float(eps), *ledgers)
                bound_rows.append(
                    BoundRow(eps=float(eps), K_minus=rep.K_minus,
                             K_plus=rep.K_plus, bound_value=rep.bound_value)
                )
            except bounds_mod.EpsTooLargeError as exc:
                notes.append(f"bound unavailable at eps={eps:g}: {exc}")
    if cfg.fit_range is not None:
        lo, hi = min(cfg.fit_range), max(cfg.fit_range)
        fit_rows = [r for r in rows if lo <= r.eps <= hi]
    else:
        fit_rows = list(rows)
    usable = [r for r in fit_rows if not r.flags and r.error > 0]
    fit = None
    fit_eps_range = None
    if len(usable) >= 4:
        fit = fit_power_law(usable)
        fit_eps_range = (min(r.eps for r in usable), max(r.eps for r in usable))
        notes.append(
            f"fit over {len(usable)} rows, eps in "
            f"[{fit_eps_range[0]:g}, {fit_eps_range[1]:g}]"
        )
    else:
        notes.append("fit skipped: fewer than 4 usable rows")
    return SweepResult(
        rows=tuple(rows),
        fit=fit,
        bound_rows=tuple(bound_rows),
        fit_eps_range=fit_eps_range,
        notes=tuple(notes),
    )


SWEEP_CSV_HEADER = "eps,error,transition_prob,bound_value,K_minus,K_plus,steps,wall_time,flags"


def export_csv(result: SweepResult, path) -> None:
    """Write the sweep as CSV with 15-significant-digit decimals."""
    by_eps = {b.eps: b for b in result.bound_rows}
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SWEEP_CSV_HEADER.split(","))
            for row in result.rows:
                bound = by_eps.get(row.eps)
                writer.writerow(
                    [
                        fmt_g15(row.eps),
                        fmt_g15(row.error),
                        fmt_g15(row.transition_prob),
                        fmt_g15(bound.bound_value) if bound else "",
                        str(bound.K_minus) if bound else "",
                        str(bound.K_plus) if bound else "",
                        str(row.steps),
                        fmt_g15(row.wall_time),
                        ";".join(row.flags),
                    ]
                )
    except OSError as exc:
        raise OSError(f"cannot write sweep CSV to {path}: {exc}") from exc


def parse_sweep_csv(path) -> list:
    """Rows of an exported sweep CSV as dicts (numeric where applicable)."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = dict(row)
            for key in ("eps", "error", "transition_prob", "bound_value", "wall_time"):
                parsed[key] = float(row[key]) if row[key] else None
            for key in ("K_minus", "K_plus", "steps"):
                parsed[key] = int(row[key]) if row[key] else None
            out.append(parsed)
    return out


def render_svg(result: SweepResult, path) -> None:
    """Self-contained SVG: log-log error scatter, fitted line, bound overlay.

    Artists carry stable SVG ids (``data-points``, ``fit-line``,
    ``bound-overlay``) so the figure can be checked programmatically.
    """
    if not result.rows:
        raise ValueError("need at least one row to render")
    from matplotlib.backends.backend_svg import FigureCanvasSVG
    from matplotlib.figure import Figure

    fig = Figure(figsize=(6.4, 4.8))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot()
    ax.set_xscale("log")
    ax.set_yscale("log")
    eps = [r.eps for r in result.rows if r.error > 0 and not math.isnan(r.error)]
    err = [r.error for r in result.rows if r.error > 0 and not math.isnan(r.error)]
    ax.plot(eps, err, "o", color="#1f4e79", label="measured", gid="data-points")
    if result.fit is not None and eps:
        grid = np.geomspace(min(eps), max(eps), 64)
        line = np.exp(result.fit.log_prefactor) * grid**result.fit.p_hat
        ax.plot(
            grid, line, "-", color="#c0504d",
            label=f"fit: slope {result.fit.p_hat:.3f}", gid="fit-line",
        )
    if result.bound_rows:
        b_eps = [b.eps for b in result.bound_rows]
        b_val = [b.bound_value for b in result.bound_rows]
        ax.plot(
            b_eps, b_val, "--", color="#4f8a4f", marker="s", markersize=3,
            label="accumulation bound (C=1)", gid="bound-overlay",
        )
    ax.set_xlabel("adiabaticity parameter")
    ax.set_ylabel("measured error")
    ax.legend(loc="best")
    ax.grid(True, which="both", alpha=0.25)
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write SVG to {path}: {exc}") from exc


def spec_to_dict(spec: ModelSpec) -> dict:
    return {
        "omega0": spec.omega0,
        "Omega": spec.Omega,
        "rho": spec.rho,
        "kind": spec.kind,
        "n_modes": spec.n_modes,
        "theta_grid": spec.theta_grid,
    }


def spec_from_dict(data: dict) -> ModelSpec:
    known = {"omega0", "Omega", "rho", "kind", "n_modes", "theta_grid"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown spec fields: {sorted(unknown)}")
    return ModelSpec(**data)


def config_to_dict(cfg: SweepConfig) -> dict:
    return {
        "spec": spec_to_dict(cfg.spec),
        "eps_grid": {
            "eps_max": cfg.eps_grid.eps_max,
            "eps_min": cfg.eps_grid.eps_min,
            "points": cfg.eps_grid.points,
        },
        "s_window": list(cfg.s_window),
        "metric": cfg.metric,
        "bound_overlay": cfg.bound_overlay,
        "output_dir": cfg.output_dir,
        "seed": cfg.seed,
        "fit_range": list(cfg.fit_range) if cfg.fit_range else None,
        "integrator": cfg.integrator,
        "c_step": cfg.c_step,
        "ledger_k": list(cfg.ledger_k) if cfg.ledger_k else None,
    }


def config_from_dict(data: dict) -> SweepConfig:
    known = {
        "spec", "eps_grid", "s_window", "metric", "bound_overlay",
        "output_dir", "seed", "fit_range", "integrator", "c_step", "ledger_k",
    }
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown sweep-config fields: {sorted(unknown)}")
    spec = spec_from_dict(data["spec"])
    grid = EpsGrid(**data["eps_grid"])
    kwargs = {}
    for key in ("metric", "bound_overlay", "output_dir", "seed", "integrator", "c_step"):
        if key in data and data[key] is not None:
            kwargs[key] = data[key]
    if data.get("s_window") is not None:
        kwargs["s_window"] = tuple(data["s_window"])
    for key in ("fit_range", "ledger_k"):
        if data.get(key) is not None:
            kwargs[key] = tuple(data[key])
    return SweepConfig(spec=spec, eps_grid=grid, **kwargs)


def load_sweep_config(path) -> SweepConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def write_sweep_outputs(cfg: SweepConfig, result: SweepResult, out_dir) -> dict:
    """Write sweep.csv, sweep.svg and the effective config.json; return paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out / "sweep.csv",
        "svg": out / "sweep.svg",
        "config": out / "config.json",
    }
    export_csv(result, paths["csv"])
    render_svg(result, paths["svg"])
    with open(paths["config"], "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
