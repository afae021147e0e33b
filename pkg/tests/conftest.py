import numpy as np
import pytest

from regdiv import (RegimeFunction, build_model, uniform_grid,
                    value_upper_bound, default_x_max)


SINGLE_CFG = {
    "regimes": [{"name": "r1", "delta": 0.1,
                 "drift": {"kind": "constant", "a": 0.3},
                 "vol": {"kind": "constant", "s": 1.0}}],
    "q_matrix": [[0.0]],
    "costs": {"c": 0.2, "d": 0.25},
    "l_bar": 1.0,
}

# same diffusion with heavy discounting: short horizons, used for Monte Carlo
MC_CFG = {
    "regimes": [{"name": "r1", "delta": 2.5,
                 "drift": {"kind": "constant", "a": 0.3},
                 "vol": {"kind": "constant", "s": 1.0}}],
    "q_matrix": [[0.0]],
    "costs": {"c": 0.2, "d": 0.25},
    "l_bar": 1.0,
}

THREE_CFG = {
    "regimes": [
        {"name": "a", "delta": 0.3, "drift": {"kind": "constant", "a": 0.3},
         "vol": {"kind": "constant", "s": 1.0}},
        {"name": "b", "delta": 0.4, "drift": {"kind": "constant", "a": 0.5},
         "vol": {"kind": "constant", "s": 0.8}},
        {"name": "c", "delta": 0.5, "drift": {"kind": "constant", "a": 0.2},
         "vol": {"kind": "constant", "s": 1.2}},
    ],
    "q_matrix": [[-0.4, 0.3, 0.1], [0.2, -0.5, 0.3], [0.1, 0.2, -0.3]],
    "costs": {"c": 0.2, "d": 0.25},
    "l_bar": 1.0,
}


@pytest.fixture(scope="session")
def single_model():
    return build_model(SINGLE_CFG)


@pytest.fixture(scope="session")
def mc_model():
    return build_model(MC_CFG)


@pytest.fixture(scope="session")
def three_model():
    return build_model(THREE_CFG)


@pytest.fixture(scope="session")
def single_grid(single_model):
    return uniform_grid(default_x_max(single_model), 2000)


def random_class_D(grid, model, rng):
    """Random nondecreasing concave grid function under the value bound with
    chord slopes at most 1/(1-c): sorted-decreasing random slopes, integrated
    and rescaled."""
    bound = value_upper_bound(model)
    cap = 1.0 / (1.0 - model.cost_c)
    vals = []
    for _ in range(model.m):
        slopes = np.sort(rng.uniform(0.0, cap, grid.size - 1))[::-1]
        v = np.concatenate([[0.0], np.cumsum(slopes * np.diff(grid))])
        v0 = rng.uniform(0.0, 0.3 * bound)
        v = v0 + v
        if v[-1] > bound:
            v = v0 + (v - v0) * (bound - v0) / (v[-1] - v0) * rng.uniform(0.7, 1.0)
        vals.append(v)
    return RegimeFunction(grid, np.array(vals))
