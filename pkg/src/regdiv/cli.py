"""Command-line front end.

Commands: validate, solve, simulate, compare.  All read a YAML config file
and write machine-readable outputs (CSV bodies are byte-stable across runs;
timestamps live only in the manifest).  Exit codes: 0 success, 1 validation
or configuration failure, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .model import (ConfigError, NumericalError, load_config, validate_model,
                    default_x_max)
from .fixedpoint import solve_value_function, value_slopes
from .simulator import StrategySpec, simulate_return, compare_strategies

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2

DEFAULT_PERTURBATION_SCALES = (0.5, 0.75, 1.25, 1.5)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write(outdir: Path, name: str, text: str, manifest: dict) -> Path:
    path = outdir / name
    path.write_text(text, encoding="utf-8", newline="\n")
    manifest["outputs"].append(name)
    return path


def _write_manifest(outdir: Path, manifest: dict) -> None:
    manifest["outputs"].append("manifest.json")
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        encoding="utf-8", newline="\n")


def _manifest(command: str, config: Path, outdir: Path, numerics, simulation) -> dict:
    return {
        "command": command,
        "config_path": str(config),
        "config_sha256": _sha256(config),
        "out_dir": str(outdir),
        "resolved_numerics": {
            "x_max": numerics.x_max, "grid_n": numerics.grid_n,
            "tol": numerics.tol, "b_tol": numerics.b_tol,
        },
        "resolved_simulation": {
            "paths": simulation.paths, "dt": simulation.dt,
            "horizon": simulation.horizon, "seed": simulation.seed,
        },
        "tool_version": __version__,
        "outputs": [],
    }


def _value_function_csv(model, sol) -> str:
    buf = io.StringIO()
    names = model.regimes
    cols = ["x"]
    for n in names:
        cols += [f"V_{n}", f"dV_{n}", f"residual_{n}"]
    buf.write(",".join(cols) + "\n")
    slopes = value_slopes(sol)
    g = sol.v.grid
    for k in range(g.size):
        row = [format(g[k], ".17g")]
        for i in range(model.m):
            row += [format(sol.v.values[i, k], ".17g"),
                    format(slopes[i, k], ".17g"),
                    format(sol.residuals[i, k], ".17g")]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def _plot_data_csv(model, sol) -> str:
    """Tidy long-format table for external plotting."""
    buf = io.StringIO()
    buf.write("x,regime,series,value\n")
    slopes = value_slopes(sol)
    g = sol.v.grid
    for i, name in enumerate(model.regimes):
        for series, arr in (("V", sol.v.values[i]), ("dV", slopes[i]),
                            ("residual", sol.residuals[i])):
            for k in range(g.size):
                buf.write(f"{format(g[k], '.17g')},{name},{series},"
                          f"{format(arr[k], '.17g')}\n")
    return buf.getvalue()


def _summary(model, sol, wall: float) -> dict:
    return {
        "thresholds": {name: {"b": t.b, "boundary_case": t.boundary_case,
                              "slope_at_b": t.slope_at_b}
                       for name, t in zip(model.regimes, sol.thresholds)},
        "iterations": sol.iterations,
        "last_step": sol.last_step,
        "error_bound": sol.error_bound,
        "kappa": sol.kappa,
        "x_max": sol.v.x_max,
        "grid_n": sol.v.grid.size - 1,
        "wall_time_s": wall,
    }


def _resolve(args):
    model, numerics, simulation = load_config(args.config)
    overrides = {}
    for flag, fld in (("tol", "tol"), ("grid_n", "grid_n"), ("x_max", "x_max")):
        val = getattr(args, flag, None)
        if val is not None:
            overrides[fld] = val
    if overrides:
        numerics = replace(numerics, **overrides)
    overrides = {}
    for fld in ("paths", "dt", "horizon", "seed"):
        val = getattr(args, fld, None)
        if val is not None:
            overrides[fld] = val
    if overrides:
        simulation = replace(simulation, **overrides)
    return model, numerics, simulation


def cmd_validate(args) -> int:
    model, numerics, simulation = _resolve(args)
    x_max = numerics.x_max if numerics.x_max is not None else default_x_max(model)
    report = validate_model(model, x_max, numerics.grid_n)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = _manifest("validate", Path(args.config), outdir, numerics, simulation)
    t0 = time.monotonic()
    _write(outdir, "validation_report.json",
           json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n", manifest)
    manifest["wall_time_s"] = time.monotonic() - t0
    _write_manifest(outdir, manifest)
    if not report.passed:
        rules = sorted({v[0] for v in report.violations})
        print(f"validation failed: {', '.join(rules)}", file=sys.stderr)
        return EXIT_VALIDATION
    print("validation passed")
    return EXIT_OK


def cmd_solve(args) -> int:
    model, numerics, simulation = _resolve(args)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = _manifest("solve", Path(args.config), outdir, numerics, simulation)
    t0 = time.monotonic()
    sol = solve_value_function(model, tol=numerics.tol, grid_n=numerics.grid_n,
                               x_max=numerics.x_max)
    wall = time.monotonic() - t0
    manifest["resolved_numerics"]["x_max"] = sol.v.x_max
    _write(outdir, "value_function.csv", _value_function_csv(model, sol), manifest)
    _write(outdir, "summary.json",
           json.dumps(_summary(model, sol, wall), indent=2, sort_keys=True) + "\n",
           manifest)
    if args.emit_plot_data:
        _write(outdir, "plot_data.csv", _plot_data_csv(model, sol), manifest)
    manifest["wall_time_s"] = wall
    _write_manifest(outdir, manifest)
    bs = ", ".join(f"{n}={t.b:.6g}" for n, t in zip(model.regimes, sol.thresholds))
    print(f"solved in {sol.iterations} iterations; thresholds: {bs}")
    return EXIT_OK


def _thresholds_from_args(args, model, outdir: Path):
    if args.thresholds:
        vals = [float(t) for t in args.thresholds.split(",")]
        if len(vals) != model.m:
            raise ConfigError(
                f"--thresholds needs {model.m} comma-separated values")
        return StrategySpec(np.array(vals))
    summary = Path(args.summary) if args.summary else outdir / "summary.json"
    if not summary.exists():
        raise ConfigError(
            "no thresholds given: pass --thresholds or --summary, or run "
            "solve into the same output directory first")
    doc = json.loads(summary.read_text())
    vals = [doc["thresholds"][name]["b"] for name in model.regimes]
    return StrategySpec(np.array(vals))


def cmd_simulate(args) -> int:
    model, numerics, simulation = _resolve(args)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    strategy = _thresholds_from_args(args, model, outdir)
    manifest = _manifest("simulate", Path(args.config), outdir, numerics, simulation)
    t0 = time.monotonic()
    est = simulate_return(model, strategy, args.x0, args.i0, simulation.paths,
                          simulation.dt, simulation.horizon, simulation.seed)
    wall = time.monotonic() - t0
    body = ("mean,std_error,paths,horizon,dt,tail_bias_bound\n"
            f"{format(est.mean, '.17g')},{format(est.std_error, '.17g')},"
            f"{est.paths},{format(est.horizon, '.17g')},"
            f"{format(est.dt, '.17g')},{format(est.tail_bias_bound, '.17g')}\n")
    _write(outdir, "simulation_report.csv", body, manifest)
    manifest["wall_time_s"] = wall
    _write_manifest(outdir, manifest)
    print(f"mean={est.mean:.6g} se={est.std_error:.3g}")
    return EXIT_OK


def cmd_compare(args) -> int:
    model, numerics, simulation = _resolve(args)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = _manifest("compare", Path(args.config), outdir, numerics, simulation)
    t0 = time.monotonic()
    sol = solve_value_function(model, tol=numerics.tol, grid_n=numerics.grid_n,
                               x_max=numerics.x_max)
    optimal = StrategySpec(np.array([t.b for t in sol.thresholds]))
    perts = [StrategySpec(optimal.thresholds * s)
             for s in DEFAULT_PERTURBATION_SCALES]
    perts.append(StrategySpec(np.zeros(model.m)))
    report = compare_strategies(model, optimal, perts, args.x0, args.i0,
                                simulation.paths, simulation.dt,
                                simulation.horizon, simulation.seed)
    wall = time.monotonic() - t0
    _write(outdir, "dominance_report.csv", report.to_csv(), manifest)
    manifest["wall_time_s"] = wall
    _write_manifest(outdir, manifest)
    n_bad = len(report.violations)
    print(f"compared {len(report.rows) - 1} perturbations; "
          f"{n_bad} violation(s)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="regdiv",
                                description="Regime-switching dividend "
                                            "threshold solver")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in (("validate", cmd_validate), ("solve", cmd_solve),
                     ("simulate", cmd_simulate), ("compare", cmd_compare)):
        sp = sub.add_parser(name)
        sp.set_defaults(fn=fn)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out-dir", default="out")
        sp.add_argument("--tol", type=float)
        sp.add_argument("--grid-n", type=int, dest="grid_n")
        sp.add_argument("--x-max", type=float, dest="x_max")
        sp.add_argument("--paths", type=int)
        sp.add_argument("--dt", type=float)
        sp.add_argument("--horizon", type=float)
        sp.add_argument("--seed", type=int)
        if name == "solve":
            sp.add_argument("--emit-plot-data", action="store_true")
        if name in ("simulate", "compare"):
            sp.add_argument("--x0", type=float, default=1.0)
            sp.add_argument("--i0", type=int, default=0)
        if name == "simulate":
            sp.add_argument("--thresholds")
            sp.add_argument("--summary")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
