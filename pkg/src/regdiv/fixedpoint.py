"""Fixed-point iteration for the value function.

The map P sends a candidate f to the optimal threshold-strategy return
function computed regime by regime with f frozen in the coupling term.  P is
a contraction with modulus max_i q_i/(q_i + delta_i), so iterating from the
two-sided bracket (zero function, constant upper bound) converges to the
value function with a certified a-posteriori error.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .model import RegimeModel, NumericalError, value_upper_bound, default_x_max
from .funcspace import (RegimeFunction, constant_function, uniform_grid,
                        sup_norm_distance, check_class_D)
from .threshold import optimal_return, ThresholdResult, CAPPED
from .odesolver import _grid_slopes


@dataclass(frozen=True)
class ValueSolution:
    v: RegimeFunction
    thresholds: tuple            # per-regime ThresholdResult
    iterations: int
    last_step: float
    error_bound: float
    kappa: float
    residuals: np.ndarray        # per-regime HJB residual field


def contraction_modulus(model: RegimeModel) -> float:
    q = model.q_out
    return float(np.max(q / (q + model.delta)))


def apply_P(model: RegimeModel, f: RegimeFunction):
    """One sweep of the fixed-point map: per regime, find the threshold for
    the frozen f and solve the associated return function."""
    values = np.empty_like(f.values)
    thresholds = []
    for i in range(model.m):
        th, sol = optimal_return(model, f, i, raise_on_cap=True)
        values[i] = sol.values
        thresholds.append(th)
    return RegimeFunction(f.grid, values), tuple(thresholds)


def _iteration_cap(model: RegimeModel, tol: float, kappa: float) -> int:
    scale = max(value_upper_bound(model), 1.0)
    if kappa <= 0.0:
        return 20
    est = math.log(tol * (1.0 - kappa) / scale) / math.log(kappa)
    return max(20, 10 * math.ceil(abs(est)))


def solve_value_function(model: RegimeModel, tol: float = 1e-8,
                         grid_n: int = 2000,
                         x_max: float | None = None) -> ValueSolution:
    """Iterate P to its fixed point from both ends of the bracket.

    Stops when the a-posteriori bound kappa/(1-kappa) * ||step|| drops below
    tol on the lower branch, checks the two branches agree within 2 tol,
    then freezes thresholds at the converged function and confirms they no
    longer move by more than one scan step.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if x_max is None:
        x_max = default_x_max(model)
    grid = uniform_grid(x_max, grid_n)
    kappa = contraction_modulus(model)
    amp = kappa / (1.0 - kappa) if kappa < 1.0 else math.inf
    bound = value_upper_bound(model)

    f_lo = constant_function(grid, model.m, 0.0)
    f_hi = constant_function(grid, model.m, bound)
    cap = _iteration_cap(model, tol, kappa)

    iterations = 0
    step_lo = math.inf
    th_lo = None
    for _ in range(cap):
        new_lo, th_lo = apply_P(model, f_lo)
        new_hi, _ = apply_P(model, f_hi)
        step_lo = sup_norm_distance(new_lo, f_lo)
        step_hi = sup_norm_distance(new_hi, f_hi)
        f_lo, f_hi = new_lo, new_hi
        iterations += 1
        if amp * max(step_lo, step_hi) <= tol:
            gap = sup_norm_distance(f_lo, f_hi)
            if gap > 2.0 * tol:
                raise NumericalError(
                    f"two-sided bracket failed to close: gap={gap}, tol={tol}")
            # freeze-and-confirm: thresholds recomputed at the converged
            # function must not move by more than one scan step
            v, th_v = apply_P(model, f_lo)
            moved = any(abs(a.b_index - b.b_index) > 8
                        for a, b in zip(th_lo, th_v))
            if not moved:
                f_lo = v
                th_lo = th_v
                iterations += 1
                break
            f_lo = v
            iterations += 1
    else:
        raise NumericalError(
            f"iteration cap {cap} exceeded (last step {step_lo}, tol {tol})")

    if any(t.boundary_case == CAPPED for t in th_lo):
        raise NumericalError("threshold capped at x_max; enlarge x_max")

    b_vec = [t.b for t in th_lo]
    residuals = hjb_residual(model, f_lo, b_vec)
    return ValueSolution(v=f_lo, thresholds=tuple(th_lo), iterations=iterations,
                         last_step=step_lo, error_bound=amp * step_lo,
                         kappa=kappa, residuals=residuals)


def hjb_residual(model: RegimeModel, v: RegimeFunction, thresholds) -> np.ndarray:
    """Pointwise residual of the coupled variational equation

        max{ (sigma^2/2) v'' + mu v' - (delta_i + q_i) v
               + sum_{j != i} q_ij v(x,j) + max(0, l_bar (1/(1+d) - v')),
             v' - 1/(1-c) } = 0

    using central differences at interior nodes.  Endpoint entries are 0.
    The thresholds argument is accepted for interface symmetry with the
    solve output; the residual itself does not depend on it.
    """
    del thresholds
    h = v.h
    n = v.grid.size
    res = np.zeros((model.m, n))
    q = model.q_matrix
    for i in range(model.m):
        vi = v.values[i]
        d1 = np.empty(n)
        d1[1:-1] = (vi[2:] - vi[:-2]) / (2.0 * h)
        d2 = np.empty(n)
        d2[1:-1] = (vi[2:] - 2.0 * vi[1:-1] + vi[:-2]) / (h * h)
        x = v.grid[1:-1]
        mu = model.drift[i](x)
        sig2 = model.vol[i](x) ** 2
        coup = np.zeros(n - 2)
        for j in range(model.m):
            if j != i:
                coup = coup + q[i, j] * v.values[j, 1:-1]
        drift_part = (sig2 / 2.0 * d2[1:-1] + mu * d1[1:-1]
                      - (model.delta[i] + model.q_out[i]) * vi[1:-1] + coup)
        div_gain = np.maximum(0.0, model.l_bar * (1.0 / (1.0 + model.cost_d) - d1[1:-1]))
        branch1 = drift_part + div_gain
        branch2 = d1[1:-1] - 1.0 / (1.0 - model.cost_c)
        res[i, 1:-1] = np.maximum(branch1, branch2)
    return res


def final_class_report(model: RegimeModel, sol: ValueSolution):
    """Mandatory class-membership check on the converged value function."""
    return check_class_D(sol.v, model)


def value_slopes(sol: ValueSolution) -> np.ndarray:
    """Per-regime first-derivative field of the converged value function."""
    return np.vstack([_grid_slopes(sol.v.values[i], sol.v.h)
                      for i in range(sol.v.m)])
