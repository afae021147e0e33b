"""Candidate value functions on a shared grid.

A RegimeFunction holds one vector of nodal values per regime on a common
uniform grid.  This module provides the sup-norm metric of the iteration
space and membership checks for the two candidate classes: bounded
nondecreasing functions, and additionally concave functions with chord
slopes at most 1/(1-c).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import io

import numpy as np

from .model import RegimeModel, value_upper_bound


@dataclass(frozen=True)
class RegimeFunction:
    grid: np.ndarray    # strictly increasing, grid[0] == 0
    values: np.ndarray  # shape (m, len(grid))

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0) or g[0] != 0.0:
            raise ValueError("grid must be strictly increasing and start at 0")
        if v.shape[1] != g.size:
            raise ValueError("values shape does not match grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")

    @property
    def m(self):
        return self.values.shape[0]

    @property
    def x_max(self):
        return float(self.grid[-1])

    @property
    def h(self):
        return float(self.grid[1] - self.grid[0])


@dataclass
class ClassReport:
    in_C: bool
    in_D: bool
    violations: list = field(default_factory=list)  # (property, regime, node, magnitude)


def uniform_grid(x_max: float, n: int) -> np.ndarray:
    return np.linspace(0.0, float(x_max), int(n) + 1)


def constant_function(grid, m: int, value: float) -> RegimeFunction:
    g = np.asarray(grid, dtype=float)
    return RegimeFunction(g, np.full((m, g.size), float(value)))


def _check_grids(f: RegimeFunction, g: RegimeFunction):
    if f.values.shape != g.values.shape or f.grid.size != g.grid.size \
            or not np.array_equal(f.grid, g.grid):
        raise ValueError("functions live on different grids or regime sets")


def sup_norm_distance(f: RegimeFunction, g: RegimeFunction) -> float:
    """max over nodes and regimes of |f - g|."""
    _check_grids(f, g)
    return float(np.max(np.abs(f.values - g.values)))


def check_class_D(f: RegimeFunction, model: RegimeModel,
                  tol_conc: float = 1e-8, tol_slope: float = 1e-8,
                  tol_bound: float = 1e-10, tol_mono: float = 1e-10) -> ClassReport:
    """Check nodal membership in the candidate classes.

    Class C: nondecreasing and bounded by l_bar/(min delta (1+d)).
    Class D: additionally concave with adjacent-node slopes <= 1/(1-c)
    (sufficient for all chords given concavity).  Tolerances scale with the
    value bound.
    """
    scale = max(value_upper_bound(model), 1e-12)
    bound = value_upper_bound(model)
    slope_cap = 1.0 / (1.0 - model.cost_c)
    h = np.diff(f.grid)
    rep = ClassReport(in_C=True, in_D=True)
    for i in range(f.m):
        v = f.values[i]
        dv = np.diff(v)
        bad = np.where(dv < -tol_mono * scale)[0]
        for k in bad:
            rep.violations.append(("nondecreasing", i, int(k + 1), float(dv[k])))
            rep.in_C = False
        bad = np.where(v > bound + tol_bound * scale)[0]
        for k in bad[:8]:
            rep.violations.append(("bound", i, int(k), float(v[k] - bound)))
            rep.in_C = False
        d2 = v[2:] - 2.0 * v[1:-1] + v[:-2]
        bad = np.where(d2 > tol_conc * scale)[0]
        for k in bad[:8]:
            rep.violations.append(("concave", i, int(k + 1), float(d2[k])))
            rep.in_D = False
        slopes = dv / h
        bad = np.where(slopes > slope_cap + tol_slope)[0]
        for k in bad[:8]:
            rep.violations.append(("chord_slope", i, int(k), float(slopes[k] - slope_cap)))
            rep.in_D = False
    rep.in_D = rep.in_D and rep.in_C
    return rep


def eval_with_derivative(f: RegimeFunction, x: float, i: int):
    """Piecewise-linear value and a slope estimate at x for regime i.

    At nodes the slope is the central difference (one-sided at the ends);
    off-node it is the slope of the containing cell.
    """
    g = f.grid
    if x < g[0] or x > g[-1]:
        raise ValueError(f"x={x} outside [0, {g[-1]}]")
    v = f.values[i]
    k = int(np.searchsorted(g, x))
    if k < g.size and g[k] == x:
        if k == 0:
            slope = (v[1] - v[0]) / (g[1] - g[0])
        elif k == g.size - 1:
            slope = (v[-1] - v[-2]) / (g[-1] - g[-2])
        else:
            slope = (v[k + 1] - v[k - 1]) / (g[k + 1] - g[k - 1])
        return float(v[k]), float(slope)
    k -= 1
    cell = (v[k + 1] - v[k]) / (g[k + 1] - g[k])
    return float(v[k] + cell * (x - g[k])), float(cell)


def to_csv(f: RegimeFunction, regime_names) -> str:
    """Serialize as `x, f_<regime1>, ...` at full double precision."""
    buf = io.StringIO()
    buf.write("x," + ",".join(f"f_{n}" for n in regime_names) + "\n")
    for k in range(f.grid.size):
        row = [format(f.grid[k], ".17g")]
        row += [format(f.values[i, k], ".17g") for i in range(f.m)]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def from_csv(text: str) -> RegimeFunction:
    lines = [ln for ln in text.strip().splitlines() if ln]
    data = np.array([[float(t) for t in ln.split(",")] for ln in lines[1:]])
    return RegimeFunction(data[:, 0], data[:, 1:].T)
