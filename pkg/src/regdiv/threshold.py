"""Optimal dividend threshold for a frozen source function and one regime.

The threshold is the smallest b >= 0 at which the slope of the threshold
strategy's return function at its own threshold drops to 1/(1+d).  The slope
is continuous in b, equals 1/(1-c) at b = 0, and is evaluated on grid nodes
only (the ODE solve snaps b to a node), so the search is a coarse scan
followed by integer bisection.
"""

from __future__ import annotations

from dataclasses import dataclass
import warnings

from .model import RegimeModel, NumericalError
from .funcspace import RegimeFunction
from .odesolver import solve_return_function, ReturnSolution

SCAN_STEP = 8
B_TOL_SLOPE = 1e-6

ZERO_THRESHOLD = "zero_threshold"
INTERIOR = "interior"
CAPPED = "capped_at_xmax"


@dataclass(frozen=True)
class ThresholdResult:
    b: float
    boundary_case: str
    slope_at_b: float
    b_index: int


class ThresholdCapped(NumericalError):
    """The slope condition found no sign change on [0, x_max]; the domain is
    truncated too aggressively and x_max must be enlarged."""


def optimal_return(model: RegimeModel, f: RegimeFunction, i: int,
                   scan_step: int = SCAN_STEP,
                   b_tol_slope: float = B_TOL_SLOPE,
                   raise_on_cap: bool = False):
    """Locate the threshold for regime i and return it together with the
    return-function solution at that threshold."""
    target = 1.0 / (1.0 + model.cost_d)
    boundary_slope = 1.0 / (1.0 - model.cost_c)
    n_last = f.grid.size - 1

    cache: dict[int, ReturnSolution] = {}

    def slope_at(k: int) -> ReturnSolution:
        sol = cache.get(k)
        if sol is None:
            sol = solve_return_function(model, f, i, f.grid[k])
            cache[k] = sol
        return sol

    if boundary_slope <= target + b_tol_slope:
        sol = slope_at(0)
        return ThresholdResult(0.0, ZERO_THRESHOLD, sol.slope_at_b, 0), sol

    # coarse scan for the leftmost bracket of the slope condition
    k_lo, k_hi = 0, None
    k = scan_step
    while k <= n_last:
        if slope_at(k).slope_at_b <= target:
            k_hi = k
            break
        k_lo = k
        k += scan_step
    else:
        if k - scan_step < n_last and slope_at(n_last).slope_at_b <= target:
            k_lo, k_hi = k - scan_step, n_last
    if k_hi is None:
        sol = slope_at(n_last)
        msg = (f"threshold search capped at x_max={f.x_max} for regime {i}; "
               f"enlarge x_max")
        if raise_on_cap:
            raise ThresholdCapped(msg)
        warnings.warn(msg)
        return ThresholdResult(f.x_max, CAPPED, sol.slope_at_b, n_last), sol

    # integer bisection: smallest node index with slope <= target
    while k_hi - k_lo > 1:
        mid = (k_lo + k_hi) // 2
        if slope_at(mid).slope_at_b <= target:
            k_hi = mid
        else:
            k_lo = mid
    sol = slope_at(k_hi)
    return ThresholdResult(float(f.grid[k_hi]), INTERIOR, sol.slope_at_b, k_hi), sol


def find_threshold(model: RegimeModel, f: RegimeFunction, i: int,
                   scan_step: int = SCAN_STEP,
                   b_tol_slope: float = B_TOL_SLOPE) -> ThresholdResult:
    res, _ = optimal_return(model, f, i, scan_step=scan_step,
                            b_tol_slope=b_tol_slope)
    return res
