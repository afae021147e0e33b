import copy

import numpy as np
import pytest

from regdiv import (ConfigError, build_model, validate_model,
                    value_upper_bound)
from regdiv.model import model_to_config
from conftest import SINGLE_CFG


def test_build_echoes_input(single_model):
    m = single_model
    assert m.m == 1
    assert m.regimes == ("r1",)
    assert m.delta[0] == 0.1
    assert m.drift[0].a == 0.3 and m.drift[0].k == 0.0
    assert m.vol[0].s == 1.0
    assert m.cost_c == 0.2 and m.cost_d == 0.25 and m.l_bar == 1.0


def test_negative_delta_rejected():
    cfg = copy.deepcopy(SINGLE_CFG)
    cfg["regimes"][0]["delta"] = -0.1
    with pytest.raises(ConfigError, match="delta must be positive"):
        build_model(cfg)


def test_generator_row_sum_rejected():
    cfg = {
        "regimes": [
            {"name": "a", "delta": 0.1, "drift": {"kind": "constant", "a": 0.3},
             "vol": {"kind": "constant", "s": 1.0}},
            {"name": "b", "delta": 0.1, "drift": {"kind": "constant", "a": 0.3},
             "vol": {"kind": "constant", "s": 1.0}},
        ],
        "q_matrix": [[-0.3, 0.2], [0.1, -0.1]],
        "costs": {"c": 0.0, "d": 0.0},
        "l_bar": 1.0,
    }
    with pytest.raises(ConfigError, match="generator row sum"):
        build_model(cfg)


def test_missing_field_rejected():
    cfg = copy.deepcopy(SINGLE_CFG)
    del cfg["l_bar"]
    with pytest.raises(ConfigError, match="l_bar"):
        build_model(cfg)


def test_dimension_mismatch_rejected():
    cfg = copy.deepcopy(SINGLE_CFG)
    cfg["q_matrix"] = [[0.0, 0.0], [0.0, 0.0]]
    with pytest.raises(ConfigError, match="q_matrix shape"):
        build_model(cfg)


def test_validate_constant_instance_passes(single_model):
    rep = validate_model(single_model, x_max=10.0, grid_n=100)
    assert rep.passed and not rep.violations
    assert rep.families["r1"] == {"drift": "constant", "vol": "constant"}


def test_validate_condition2_violation():
    cfg = copy.deepcopy(SINGLE_CFG)
    cfg["regimes"][0]["drift"] = {"kind": "affine", "a": 0.3, "k": 0.2}
    rep = validate_model(build_model(cfg), x_max=10.0, grid_n=100)
    assert not rep.passed
    assert any(v[0] == "condition2" for v in rep.violations)


def test_validate_sigma_sign_change():
    cfg = copy.deepcopy(SINGLE_CFG)
    cfg["regimes"][0]["vol"] = {"kind": "affine", "s": 0.1, "r": -0.2}
    rep = validate_model(build_model(cfg), x_max=1.0, grid_n=100)
    bad = [v for v in rep.violations if v[0] == "sigma_floor"]
    assert bad and bad[0][2] >= 0.5 - 1e-9


def test_degenerate_l_bar_flagged():
    cfg = copy.deepcopy(SINGLE_CFG)
    cfg["l_bar"] = 0.0
    m = build_model(cfg)  # accepted at build time
    rep = validate_model(m, x_max=10.0, grid_n=50)
    assert any(v[0] == "degenerate_l_bar" for v in rep.violations)


@pytest.mark.parametrize("l_bar,d,deltas,expected", [
    (1.0, 0.0, [0.1], 10.0),
    (0.0, 0.0, [0.1], 0.0),
    (2.0, 1.0, [0.5, 0.25], 4.0),
])
def test_value_upper_bound(l_bar, d, deltas, expected):
    cfg = {
        "regimes": [{"name": f"r{k}", "delta": dl,
                     "drift": {"kind": "constant", "a": 0.0},
                     "vol": {"kind": "constant", "s": 1.0}}
                    for k, dl in enumerate(deltas)],
        "q_matrix": (np.zeros((len(deltas), len(deltas)))).tolist(),
        "costs": {"c": 0.0, "d": d},
        "l_bar": l_bar,
    }
    assert value_upper_bound(build_model(cfg)) == pytest.approx(expected)


def test_config_round_trip(three_model):
    m2 = build_model(model_to_config(three_model))
    assert m2.regimes == three_model.regimes
    assert np.array_equal(m2.q_matrix, three_model.q_matrix)
    assert np.array_equal(m2.delta, three_model.delta)
    assert m2.drift == three_model.drift
    assert m2.vol == three_model.vol
    assert (m2.cost_c, m2.cost_d, m2.l_bar) == \
        (three_model.cost_c, three_model.cost_d, three_model.l_bar)


def test_negative_drift_at_zero_rejected():
    cfg = copy.deepcopy(SINGLE_CFG)
    cfg["regimes"][0]["drift"] = {"kind": "constant", "a": -0.1}
    with pytest.raises(ConfigError, match="drift at 0"):
        build_model(cfg)
