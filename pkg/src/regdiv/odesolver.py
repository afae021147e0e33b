"""Return function of a threshold strategy, for one regime and one threshold.

Solves the two-piece linear ODE

    (sigma^2/2) g'' + (mu - l_bar 1{x>=b}) g' - (delta_i + q_i) g
        + sum_{j != i} q_ij f(x,j) + (l_bar/(1+d)) 1{x>=b} = 0

on (0, x_max) with the mixed boundary conditions g'(0+) = 1/(1-c) and
g(x_max) = tail constant, discretized by finite differences on the shared
uniform grid and solved as one tridiagonal system.  The threshold is snapped
to the nearest grid node so the two pieces and the C^1 matching come out of
the single global discretization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .model import RegimeModel, NumericalError
from .funcspace import RegimeFunction


@dataclass(frozen=True)
class ReturnSolution:
    values: np.ndarray
    slopes: np.ndarray
    tail: float
    slope_at_b: float
    b: float
    b_index: int


def tail_value(model: RegimeModel, f: RegimeFunction, i: int) -> float:
    """Limit of the return function at infinity,
    (l_bar/(1+d) + sum_{j != i} q_ij f(inf, j)) / (q_i + delta_i),
    with f(inf, j) represented by the last grid node."""
    q = model.q_matrix
    coup = sum(q[i, j] * f.values[j, -1] for j in range(model.m) if j != i)
    return (model.l_bar / (1.0 + model.cost_d) + coup) / (model.q_out[i] + model.delta[i])


def snap_index(f: RegimeFunction, b: float) -> int:
    return int(np.clip(round(b / f.h), 0, f.grid.size - 1))


def _grid_slopes(values: np.ndarray, h: float) -> np.ndarray:
    """Central differences inside, second-order one-sided at the ends."""
    s = np.empty_like(values)
    s[1:-1] = (values[2:] - values[:-2]) / (2.0 * h)
    s[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
    s[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * h)
    return s


def _assemble(model: RegimeModel, f: RegimeFunction, i: int, b_idx: int):
    """Banded matrix (lower/diag/upper) and right-hand side for regime i."""
    x = f.grid
    n = x.size
    h = f.h
    rate = model.delta[i] + model.q_out[i]
    beta = 1.0 / (1.0 - model.cost_c)

    mu = model.drift[i](x)
    sig2 = model.vol[i](x) ** 2
    ind = (np.arange(n) >= b_idx).astype(float)
    mu_eff = mu - model.l_bar * ind

    source = model.l_bar / (1.0 + model.cost_d) * ind
    q = model.q_matrix
    for j in range(model.m):
        if j != i:
            source = source + q[i, j] * f.values[j]

    diffu = sig2 / (2.0 * h * h)
    lower = np.zeros(n)
    diag = np.zeros(n)
    upper = np.zeros(n)
    rhs = -source.copy()

    adv = mu_eff / (2.0 * h)
    lo = diffu - adv
    di = -2.0 * diffu - rate
    up = diffu + adv
    # first-order upwind where advection dominates diffusion (keeps the
    # system an M-matrix, no spurious oscillation)
    peclet = np.abs(mu_eff) * h / np.maximum(sig2, 1e-300)
    uw = peclet > 2.0
    if np.any(uw):
        pos = uw & (mu_eff > 0)
        neg = uw & (mu_eff <= 0)
        lo = np.where(pos, diffu, lo)
        di = np.where(pos, -2.0 * diffu - mu_eff / h - rate, di)
        up = np.where(pos, diffu + mu_eff / h, up)
        lo = np.where(neg, diffu - mu_eff / h, lo)
        di = np.where(neg, -2.0 * diffu + mu_eff / h - rate, di)
        up = np.where(neg, diffu, up)
    lower[:-1] = lo[1:]
    diag[:] = di
    upper[1:] = up[:-1]

    # node 0: ghost-node enforcement of g'(0+) = 1/(1-c), second order
    diag[0] = -2.0 * diffu[0] - rate
    upper[1] = 2.0 * diffu[0]
    rhs[0] = sig2[0] * beta / h - mu_eff[0] * beta - source[0]

    # node n-1: Dirichlet closure at the known limit
    tail = tail_value(model, f, i)
    lower[-2] = 0.0
    diag[-1] = 1.0
    rhs[-1] = tail

    ab = np.zeros((3, n))
    ab[0, 1:] = upper[1:]
    ab[1, :] = diag
    ab[2, :-1] = lower[:-1]
    return ab, rhs, tail


def solve_return_function(model: RegimeModel, f: RegimeFunction, i: int,
                          b: float) -> ReturnSolution:
    """Return function of the threshold strategy with level b in regime i,
    for the frozen source function f."""
    if not (0.0 <= b <= f.x_max):
        raise ValueError(f"threshold b={b} outside [0, {f.x_max}]")
    if not np.all(np.isfinite(f.values)):
        raise ValueError("source function has non-finite values")
    b_idx = snap_index(f, b)
    ab, rhs, tail = _assemble(model, f, i, b_idx)
    try:
        values = solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"singular tridiagonal system for regime {i}, b={b} "
            f"(delta_i+q_i={model.delta[i] + model.q_out[i]})") from exc
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"non-finite solution for regime {i}, b={b}")
    slopes = _grid_slopes(values, f.h)
    return ReturnSolution(values=values, slopes=slopes, tail=tail,
                          slope_at_b=float(slopes[b_idx]),
                          b=float(f.grid[b_idx]), b_index=b_idx)


def threshold_slope(model: RegimeModel, f: RegimeFunction, i: int, b: float) -> float:
    """Slope of the return function at its own threshold, R'(b, i)."""
    return solve_return_function(model, f, i, b).slope_at_b


def ode_residual(model: RegimeModel, f: RegimeFunction, i: int,
                 sol: ReturnSolution) -> np.ndarray:
    """Discrete residual of the solved system at interior nodes (diagnostic)."""
    ab, rhs, _ = _assemble(model, f, i, sol.b_index)
    n = sol.values.size
    res = np.zeros(n)
    v = sol.values
    res[0] = ab[1, 0] * v[0] + ab[0, 1] * v[1] - rhs[0]
    res[1:-1] =(ab[2, 0:n - 2] * v[0:n - 2] + ab[1, 1:n - 1] * v[1:n - 1]
                 + ab[0, 2:n] * v[2:n] - rhs[1:n - 1])
    return res
