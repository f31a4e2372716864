"""Batch front-end: configure, run, verify, and sweep experiments.

Commands (console script ``gg``):

  gg run <config>      march the configured run, writing a diagnostics CSV,
                       a summary JSON, and optionally an SVG energy plot
  gg verify <config>   evaluate the identity/inequality battery on seeded
                       states plus a decay fit, reporting pass/fail per check
  gg sweep <config> --axis k=0.25,0.5,1.0
                       rerun the experiment over a parameter grid, fitting
                       the energy decay rate at every point concurrently

Exit codes: 0 success, 2 configuration or coefficient error, 3 blow-up,
4 verification failure. GG_THREADS caps sweep parallelism.
"""
from __future__ import annotations

import argparse
import importlib.resources
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import jsonschema
import numpy as np

from .config import (ConfigError, ExperimentConfig, apply_overrides,
                     atomic_write_text, build_initial_state, load_config)
from .functionals import functional_record
from .integrator import BlowUpError, default_dt, evolve
from .model import (CoefficientError, check_coefficients,
                    validate_coefficients)
from .spectral import make_grid
from .verification import (EXACT_IDENTITY_IDS, check_poincare_holder,
                           fit_decay_rate, product_bound_violations,
                           random_smooth_field, random_smooth_state,
                           residual_general_n, residual_h1, residual_h2,
                           residual_l2, scale_state)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_VERIFY = 4

EXACT_RESIDUAL_TOL = 1e-8
# An amplitude halving must roughly halve an approximate identity's relative
# residual (cubic dropped terms over a quadratic normalizer), +/- 25%.
APPROX_RATIO_WINDOW = (0.25, 0.75)
POINCARE_EXPONENTS = (1.0, 2.0, 4.0, math.inf)


def _fmt(value) -> str:
    return format(float(value), ".17g")


def load_summary_schema() -> dict:
    text = (importlib.resources.files("ggkdv")
            .joinpath("schemas/summary.schema.json").read_text("utf-8"))
    return json.loads(text)


def validate_summary(summary: dict) -> None:
    jsonschema.validate(summary, load_summary_schema())


def write_summary(path: str | None, summary: dict) -> None:
    validate_summary(summary)
    if path is not None:
        atomic_write_text(path, json.dumps(summary, indent=2) + "\n")


def write_csv(path: str, names: list, columns: dict) -> None:
    n_rows = len(columns[names[0]])
    lines = [",".join(names)]
    for i in range(n_rows):
        lines.append(",".join(_fmt(columns[name][i]) for name in names))
    atomic_write_text(path, "\n".join(lines) + "\n")


def render_energy_svg(path: str, t, energy) -> bool:
    """Log10-energy line plot, written as a self-contained SVG document."""
    points = [(float(tt), math.log10(float(e)))
              for tt, e in zip(t, energy) if e > 0.0]
    if len(points) < 2:
        return False
    width, height = 640, 400
    left, right, top, bottom = 70, 620, 30, 360
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0

    def px(x):
        return left + (right - left) * (x - x_lo) / (x_hi - x_lo)

    def py(y):
        return bottom - (bottom - top) * (y - y_lo) / (y_hi - y_lo)

    poly = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in points)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" '
        'stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" '
        'stroke="black"/>',
    ]
    for i in range(5):
        x = x_lo + (x_hi - x_lo) * i / 4
        y = y_lo + (y_hi - y_lo) * i / 4
        parts.append(f'<line x1="{px(x):.2f}" y1="{bottom}" '
                     f'x2="{px(x):.2f}" y2="{bottom + 5}" stroke="black"/>')
        parts.append(f'<text x="{px(x):.2f}" y="{bottom + 20}" '
                     f'font-size="12" text-anchor="middle">{x:.3g}</text>')
        parts.append(f'<line x1="{left - 5}" y1="{py(y):.2f}" '
                     f'x2="{left}" y2="{py(y):.2f}" stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{py(y) + 4:.2f}" '
                     f'font-size="12" text-anchor="end">{y:.3g}</text>')
    parts.append(f'<text x="{(left + right) / 2}" y="{height - 5}" '
                 'font-size="13" text-anchor="middle">t</text>')
    parts.append(f'<text x="15" y="{(top + bottom) / 2}" font-size="13" '
                 f'text-anchor="middle" transform="rotate(-90 15 '
                 f'{(top + bottom) / 2})">log10 energy</text>')
    parts.append(f'<polyline points="{poly}" fill="none" stroke="#1f77b4" '
                 'stroke-width="1.5"/>')
    parts.append("</svg>")
    atomic_write_text(path, "\n".join(parts) + "\n")
    return True


def _grid_dict(grid) -> dict:
    return {"n_points": grid.n_points, "n_modes": grid.n_modes,
            "dealias_cutoff": grid.dealias_cutoff}


def _coeff_dict(c) -> dict:
    out = c.to_coefficient_set().to_dict()
    out["branch"] = c.branch
    return out


def _fit_dict(fit) -> dict:
    return {"quantity_id": fit.quantity_id, "window": list(fit.window),
            "fitted_rate": fit.fitted_rate, "intercept": fit.intercept,
            "target_rate": fit.target_rate, "r_squared": fit.r_squared,
            "n_points": fit.n_points}


def _requested_exact_ids(cfg: ExperimentConfig, means_zero: bool
                         ) -> tuple[list, list]:
    """(identity ids to track, check names skipped because means != 0)."""
    ids, skipped = [], []
    if "L2" in cfg.checks:
        ids.append("L2")
    if "GEN_N" in cfg.checks:
        ids.extend(f"GEN_N({n})" for n in range(cfg.n_max + 1))
    for name, group in (("H1", ("H1_MAIN", "H1_SUB(4.2)", "H1_SUB(4.3)",
                                "H1_SUB(4.4)", "H1_SUB(4.5)")),
                        ("H2", ("H2_SUB(5.2)", "H2_SUB(5.3)"))):
        if name in cfg.checks:
            if means_zero:
                ids.extend(group)
            else:
                skipped.append(name)
    return ids, skipped


def _exact_reports(state, c, ids: list) -> dict:
    """IdentityReport for each requested exact identity at one state."""
    out = {}
    if "L2" in ids:
        out["L2"] = residual_l2(state, c)
    for identity_id in ids:
        if identity_id.startswith("GEN_N("):
            n = int(identity_id[6:-1])
            out[identity_id] = residual_general_n(state, c, n)
    if any(i.startswith("H1") for i in ids):
        reports = residual_h1(state, c)
        for identity_id in ids:
            if identity_id.startswith("H1"):
                out[identity_id] = reports[identity_id]
    if any(i.startswith("H2") for i in ids):
        reports = residual_h2(state, c)
        for identity_id in ids:
            if identity_id.startswith("H2"):
                out[identity_id] = reports[identity_id]
    return out


def _resolve_stepping(cfg: ExperimentConfig, grid, c) -> tuple[float, int]:
    """(dt, stride): an explicit dt is honored, a default one is rounded so
    that whole steps and whole strides tile [0, t_final] exactly."""
    if cfg.dt is not None:
        return cfg.dt, cfg.stride
    guess = default_dt(grid, c)
    n_steps = max(cfg.stride, int(math.ceil(cfg.t_final / guess)))
    n_steps = ((n_steps + cfg.stride - 1) // cfg.stride) * cfg.stride
    return cfg.t_final / n_steps, cfg.stride


def cmd_run(cfg: ExperimentConfig) -> int:
    try:
        c = validate_coefficients(cfg.coefficients)
    except CoefficientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    grid = make_grid(cfg.n_points)
    state = build_initial_state(cfg, grid)
    means_zero = state.mean_u == 0.0 and state.mean_v == 0.0
    exact_ids, skipped = _requested_exact_ids(cfg, means_zero)

    record_names = list(functional_record(state, c, cfg.n_max)
                        .as_columns().keys())

    def record_observer(st):
        return functional_record(st, c, cfg.n_max).as_columns()

    def residual_observer(st):
        # Defect and normalizer are aggregated separately over the run: at
        # isolated degenerate states (e.g. a pure mode at t = 0) both sides
        # of a cross-term identity vanish to round-off, so the instantaneous
        # ratio is 0/0 noise; the run-level residual divides the worst defect
        # by the run's own scale instead.
        row = {}
        for key, rep in _exact_reports(st, c, exact_ids).items():
            row[f"defect::{key}"] = abs(rep.lhs - rep.rhs)
            row[f"norm::{key}"] = rep.normalizer
        return row

    observers = [record_observer]
    if exact_ids:
        observers.append(residual_observer)

    try:
        dt, stride = _resolve_stepping(cfg, grid, c)
        series = evolve(state, c, cfg.t_final, dt, observers=observers,
                        stride=stride)
    except BlowUpError as exc:
        summary = {
            "schema_version": 1, "command": "run", "status": "blow_up",
            "grid": _grid_dict(grid), "coefficients": _coeff_dict(c),
            "run": None, "energy": None, "blow_up_time": exc.time,
        }
        write_summary(cfg.summary_path, summary)
        print(f"blow-up: first non-finite state at t = {exc.time:.6g}",
              file=sys.stderr)
        return EXIT_BLOWUP
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if cfg.csv_path is not None:
        write_csv(cfg.csv_path, record_names, series.columns)
        print(f"wrote {cfg.csv_path}")

    residual_max = {}
    for i in exact_ids:
        defect = float(np.max(series.columns[f"defect::{i}"]))
        norm = float(np.max(series.columns[f"norm::{i}"]))
        residual_max[i] = defect / max(norm, 1e-30)
    offenders = [i for i, r in residual_max.items()
                 if r > EXACT_RESIDUAL_TOL]

    fits = []
    window = cfg.resolved_fit_window()
    for name in ["energy"] + [f"seminorm_sq_{n}"
                              for n in range(1, cfg.n_max + 1)]:
        try:
            fits.append(fit_decay_rate(series, name, window,
                                       target_rate=-2.0 * c.k))
        except ValueError:
            pass  # zero data or window too sparse: fits are informational

    energy_col = series.columns["energy"]
    summary = {
        "schema_version": 1, "command": "run",
        "status": "ok" if not offenders else "identity_failure",
        "grid": _grid_dict(grid), "coefficients": _coeff_dict(c),
        "run": {"dt": dt, "t_final": cfg.t_final, "stride": stride,
                "n_steps": series.meta["n_steps"],
                "n_observations": len(series.t),
                "max_mean_drift": series.meta["max_mean_drift"]},
        "energy": {"initial": float(energy_col[0]),
                   "final": float(energy_col[-1])},
        "identity_residuals": residual_max,
        "decay_fits": [_fit_dict(f) for f in fits],
        "blow_up_time": None,
    }
    if skipped:
        summary["failures"] = [f"{name}: skipped (identities require "
                               "zero-mean data)" for name in skipped]
    write_summary(cfg.summary_path, summary)
    if cfg.summary_path is not None:
        print(f"wrote {cfg.summary_path}")
    if cfg.plot_path is not None:
        if render_energy_svg(cfg.plot_path, series.t, energy_col):
            print(f"wrote {cfg.plot_path}")

    if offenders:
        for identity_id in offenders:
            print(f"identity failure: {identity_id} relative residual "
                  f"{residual_max[identity_id]:.3e} > {EXACT_RESIDUAL_TOL}",
                  file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _median(values: list) -> float:
    return float(np.median(np.asarray(values, dtype=float)))


def cmd_verify(cfg: ExperimentConfig) -> int:
    try:
        c = validate_coefficients(cfg.coefficients)
    except CoefficientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    grid = make_grid(cfg.n_points)
    vs = cfg.verify
    states = [random_smooth_state(grid, seed=vs.seed + i,
                                  amplitude=vs.amplitude, kmax=vs.kmax)
              for i in range(vs.n_states)]

    checks = []

    def add(check_id, passed, value=None, threshold=None, detail=None):
        checks.append({"check_id": check_id, "passed": bool(passed),
                       "value": None if value is None else float(value),
                       "threshold": threshold, "detail": detail})

    def add_exact(check_id, residuals):
        worst = max(residuals)
        add(check_id, worst <= EXACT_RESIDUAL_TOL, worst,
            EXACT_RESIDUAL_TOL, f"max over {len(residuals)} states")

    if "L2" in cfg.checks:
        add_exact("L2", [residual_l2(s, c).relative_residual
                         for s in states])
    if "GEN_N" in cfg.checks:
        for n in range(cfg.n_max + 1):
            add_exact(f"GEN_N({n})",
                      [residual_general_n(s, c, n).relative_residual
                       for s in states])
    if "H1" in cfg.checks:
        per_state = [residual_h1(s, c) for s in states]
        for identity_id in ("H1_MAIN", "H1_SUB(4.2)", "H1_SUB(4.3)",
                            "H1_SUB(4.4)", "H1_SUB(4.5)"):
            add_exact(identity_id,
                      [r[identity_id].relative_residual for r in per_state])
    if "H2" in cfg.checks:
        full = [residual_h2(s, c) for s in states]
        half = [residual_h2(scale_state(s, 0.5), c) for s in states]
        for identity_id in ("H2_SUB(5.2)", "H2_SUB(5.3)"):
            add_exact(identity_id,
                      [r[identity_id].relative_residual for r in full])
        for identity_id in ("H2_MAIN", "H2_SUB(5.4)", "H2_SUB(5.5)",
                            "H2_SUB(5.6)"):
            ratios = [h[identity_id].relative_residual
                      / max(f[identity_id].relative_residual, 1e-300)
                      for f, h in zip(full, half)]
            med = _median(ratios)
            lo, hi = APPROX_RATIO_WINDOW
            add(f"{identity_id} scaling", lo <= med <= hi, med, None,
                f"median residual ratio under amplitude halving over "
                f"{len(ratios)} states; want within [{lo}, {hi}]")
    if "POINCARE" in cfg.checks:
        rng = np.random.default_rng(vs.seed)
        bad = 0
        for _ in range(vs.poincare_fields):
            f = random_smooth_field(grid, rng, kmax=vs.kmax)
            for p in POINCARE_EXPONENTS:
                for q in POINCARE_EXPONENTS:
                    if not check_poincare_holder(f, p, q):
                        bad += 1
        add("POINCARE", bad == 0, bad, 0,
            f"{vs.poincare_fields} fields x "
            f"{len(POINCARE_EXPONENTS) ** 2} (p, q) pairs")
    if "PRODUCT_BOUND" in cfg.checks:
        rng = np.random.default_rng(vs.seed + 1)
        bad = 0
        for _ in range(vs.product_fields):
            u = random_smooth_field(grid, rng, kmax=vs.kmax)
            v = random_smooth_field(grid, rng, kmax=vs.kmax)
            bad += len(product_bound_violations(u, v))
        add("PRODUCT_BOUND", bad == 0, bad, 0,
            f"{vs.product_fields} field pairs, admissible exponents")

    fits = []
    if "DECAY" in cfg.checks:
        state = build_initial_state(cfg, grid)
        try:
            dt, stride = _resolve_stepping(cfg, grid, c)
            series = evolve(state, c, cfg.t_final, dt,
                            observers=[lambda st: functional_record(
                                st, c, cfg.n_max).as_columns()],
                            stride=stride)
            fit = fit_decay_rate(series, "energy", cfg.resolved_fit_window(),
                                 target_rate=-2.0 * c.k)
            fits.append(fit)
            ok = (fit.fitted_rate <= -2.0 * 0.95 * c.k
                  and fit.r_squared >= 0.99)
            add("DECAY", ok, fit.fitted_rate, -2.0 * 0.95 * c.k,
                f"energy rate over window {fit.window}, "
                f"r^2 = {fit.r_squared:.6f}")
        except BlowUpError as exc:
            add("DECAY", False, None, None,
                f"blow-up at t = {exc.time:.6g}")
        except ValueError as exc:
            add("DECAY", False, None, None, f"fit failed: {exc}")

    failures = [entry["check_id"] for entry in checks if not entry["passed"]]
    summary = {
        "schema_version": 1, "command": "verify",
        "status": "ok" if not failures else "check_failure",
        "grid": _grid_dict(grid), "coefficients": _coeff_dict(c),
        "checks": checks,
        "decay_fits": [_fit_dict(f) for f in fits],
        "failures": failures,
    }
    write_summary(cfg.summary_path, summary)
    for entry in checks:
        tag = "PASS" if entry["passed"] else "FAIL"
        value = "" if entry["value"] is None else f"  {entry['value']:.3e}"
        print(f"{tag}  {entry['check_id']}{value}")
    if cfg.summary_path is not None:
        print(f"wrote {cfg.summary_path}")
    if failures:
        print("verification failed: " + ", ".join(failures), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _parse_axes(axis_args: list) -> list:
    axes = []
    for spec in axis_args:
        name, _, values = spec.partition("=")
        name = name.strip()
        if not name or not values:
            raise ConfigError(f"bad axis spec {spec!r}; "
                              "expected name=v1,v2,...")
        try:
            parsed = [float(v) for v in values.split(",")]
        except ValueError:
            raise ConfigError(f"non-numeric value in axis {spec!r}") from None
        if not parsed:
            raise ConfigError(f"axis {spec!r} lists no values")
        axes.append((name, parsed))
    return axes


def _sweep_points(axes: list) -> list:
    points = [{}]
    for name, values in axes:
        points = [{**p, name: v} for p in points for v in values]
    return points


def _thread_cap(n_points: int) -> int:
    cap = os.cpu_count() or 1
    env = os.environ.get("GG_THREADS")
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            pass
    return max(1, min(cap, n_points))


def cmd_sweep(cfg: ExperimentConfig, axis_args: list) -> int:
    try:
        axes = _parse_axes(axis_args)
        if not axes:
            raise ConfigError("empty sweep spec: pass at least one "
                              "--axis name=v1,v2,...")
        points = _sweep_points(axes)
        configs = [apply_overrides(cfg, point) for point in points]
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for point, point_cfg in zip(points, configs):
        bad = check_coefficients(point_cfg.coefficients)
        if bad:
            names = ", ".join(v.constraint for v in bad)
            print(f"error: sweep point {point} violates: {names}",
                  file=sys.stderr)
            return EXIT_CONFIG

    def run_point(point_cfg: ExperimentConfig) -> dict:
        c = validate_coefficients(point_cfg.coefficients)
        grid = make_grid(point_cfg.n_points)
        state = build_initial_state(point_cfg, grid)
        row = {"status": "ok", "fitted_rate": None, "r_squared": None,
               "target_rate": -2.0 * c.k, "blow_up_time": None}
        try:
            dt, stride = _resolve_stepping(point_cfg, grid, c)
            series = evolve(state, c, point_cfg.t_final, dt,
                            observers=[lambda st: functional_record(
                                st, c, point_cfg.n_max).as_columns()],
                            stride=stride)
            fit = fit_decay_rate(series, "energy",
                                 point_cfg.resolved_fit_window(),
                                 target_rate=-2.0 * c.k)
            row.update(fitted_rate=fit.fitted_rate, r_squared=fit.r_squared)
        except BlowUpError as exc:
            row.update(status="blow_up", blow_up_time=exc.time)
        except ValueError:
            row.update(status="fit_failed")
        return row

    with ThreadPoolExecutor(max_workers=_thread_cap(len(points))) as pool:
        rows = list(pool.map(run_point, configs))

    axis_names = [name for name, _ in axes]
    if cfg.csv_path is not None:
        names = axis_names + ["fitted_rate", "target_rate", "r_squared",
                              "status"]
        lines = [",".join(names)]
        for point, row in zip(points, rows):
            cells = [_fmt(point[a]) for a in axis_names]
            for key in ("fitted_rate", "target_rate", "r_squared"):
                cells.append("" if row[key] is None else _fmt(row[key]))
            cells.append(row["status"])
            lines.append(",".join(cells))
        atomic_write_text(cfg.csv_path, "\n".join(lines) + "\n")
        print(f"wrote {cfg.csv_path}")

    base_coeffs = validate_coefficients(cfg.coefficients)
    statuses = [row["status"] for row in rows]
    summary = {
        "schema_version": 1, "command": "sweep",
        "status": ("ok" if all(s == "ok" for s in statuses)
                   else "blow_up" if "blow_up" in statuses
                   else "check_failure"),
        "grid": _grid_dict(make_grid(cfg.n_points)),
        "coefficients": _coeff_dict(base_coeffs),
        "points": [{"point": point, **row}
                   for point, row in zip(points, rows)],
    }
    write_summary(cfg.summary_path, summary)
    if cfg.summary_path is not None:
        print(f"wrote {cfg.summary_path}")
    for point, row in zip(points, rows):
        rate = ("" if row["fitted_rate"] is None
                else f"  rate {row['fitted_rate']:+.6f} "
                     f"(target {row['target_rate']:+.6f})")
        print(f"{row['status']:>10}  {point}{rate}")
    if "blow_up" in statuses:
        return EXIT_BLOWUP
    if any(s != "ok" for s in statuses):
        return EXIT_VERIFY
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gg",
        description="Damped coupled-KdV pseudospectral runs and verification")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "march one configured experiment"),
                            ("verify", "evaluate the verification battery"),
                            ("sweep", "rerun over a parameter grid")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to the YAML experiment config")
        if name == "sweep":
            p.add_argument("--axis", action="append", default=[],
                           metavar="NAME=V1,V2,...",
                           help="sweep axis; repeatable")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "run":
        return cmd_run(cfg)
    if args.command == "verify":
        return cmd_verify(cfg)
    return cmd_sweep(cfg, args.axis)


if __name__ == "__main__":
    sys.exit(main())
