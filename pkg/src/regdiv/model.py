"""Problem instance definition, ingestion and validation.

A problem instance is a surplus diffusion whose drift, volatility and
discount rate are modulated by a finite-state Markov chain, together with
the transaction frictions (injection cost c, dividend cost d) and the
dividend-rate cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
import yaml

SIGMA_FLOOR = 1e-8


class ConfigError(ValueError):
    """Raised when a configuration document is malformed or inconsistent."""


class NumericalError(RuntimeError):
    """Raised when a solve fails numerically (singular system, iteration cap,
    threshold capped at the domain boundary)."""


@dataclass(frozen=True)
class DriftSpec:
    """Drift family mu(x) = a + k*x; kind is 'constant' (k = 0) or 'affine'."""
    kind: str
    a: float
    k: float = 0.0

    def __call__(self, x):
        return self.a + self.k * np.asarray(x, dtype=float)

    def slope(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.k)


@dataclass(frozen=True)
class VolSpec:
    """Volatility family sigma(x) = s + r*x; kind is 'constant' or 'affine'."""
    kind: str
    s: float
    r: float = 0.0

    def __call__(self, x):
        return self.s + self.r * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class RegimeModel:
    regimes: tuple
    q_matrix: np.ndarray      # m x m generator, rows sum to 0
    delta: np.ndarray         # per-regime discount rate, > 0
    drift: tuple              # per-regime DriftSpec
    vol: tuple                # per-regime VolSpec
    cost_c: float             # injection friction, in [0, 1)
    cost_d: float             # dividend friction, >= 0
    l_bar: float              # maximal dividend rate

    @property
    def m(self):
        return len(self.regimes)

    @property
    def q_out(self):
        """Per-regime exit rates q_i = -q_ii."""
        return -np.diag(self.q_matrix)


@dataclass(frozen=True)
class Numerics:
    x_max: float | None = None
    grid_n: int = 2000
    tol: float = 1e-8
    b_tol: float | None = None


@dataclass(frozen=True)
class SimParams:
    paths: int = 100_000
    dt: float = 1e-3
    horizon: float = 100.0
    seed: int = 0


@dataclass
class ValidationReport:
    passed: bool
    violations: list = field(default_factory=list)  # (rule, regime, x, value)
    families: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "passed": self.passed,
            "violations": [
                {"rule": r, "regime": reg, "x": x, "value": v}
                for (r, reg, x, v) in self.violations
            ],
            "families": self.families,
        }


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _parse_drift(doc, name):
    _require(isinstance(doc, dict) and "kind" in doc, f"regime {name}: drift must have a 'kind'")
    kind = doc["kind"]
    _require(kind in ("constant", "affine"), f"regime {name}: unsupported drift kind {kind!r}")
    _require("a" in doc, f"regime {name}: drift needs field 'a'")
    k = float(doc.get("k", 0.0)) if kind == "affine" else 0.0
    if kind == "affine":
        _require("k" in doc, f"regime {name}: affine drift needs field 'k'")
    return DriftSpec(kind, float(doc["a"]), k)


def _parse_vol(doc, name):
    _require(isinstance(doc, dict) and "kind" in doc, f"regime {name}: vol must have a 'kind'")
    kind = doc["kind"]
    _require(kind in ("constant", "affine"), f"regime {name}: unsupported vol kind {kind!r}")
    _require("s" in doc, f"regime {name}: vol needs field 's'")
    r = float(doc.get("r", 0.0)) if kind == "affine" else 0.0
    if kind == "affine":
        _require("r" in doc, f"regime {name}: affine vol needs field 'r'")
    return VolSpec(kind, float(doc["s"]), r)


def build_model(config: dict) -> RegimeModel:
    """Build a RegimeModel from a parsed configuration document.

    Mathematical parameters are never defaulted; a missing field is an error.
    """
    _require(isinstance(config, dict), "config must be a mapping")
    for key in ("regimes", "q_matrix", "costs", "l_bar"):
        _require(key in config, f"missing required field {key!r}")

    regs = config["regimes"]
    _require(isinstance(regs, list) and len(regs) >= 1, "regimes must be a nonempty list")
    names, deltas, drifts, vols = [], [], [], []
    for k, r in enumerate(regs):
        _require(isinstance(r, dict), f"regime entry {k} must be a mapping")
        for f in ("name", "delta", "drift", "vol"):
            _require(f in r, f"regime entry {k}: missing field {f!r}")
        name = str(r["name"])
        delta = float(r["delta"])
        _require(delta > 0, f"delta must be positive (regime {name}: {delta})")
        names.append(name)
        deltas.append(delta)
        drifts.append(_parse_drift(r["drift"], name))
        vols.append(_parse_vol(r["vol"], name))
    _require(len(set(names)) == len(names), "regime names must be unique")

    m = len(names)
    try:
        q = np.array(config["q_matrix"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"q_matrix is not a numeric matrix: {exc}") from exc
    _require(q.shape == (m, m), f"q_matrix shape {q.shape} does not match {m} regimes")
    for i in range(m):
        s = q[i].sum()
        _require(abs(s) <= 1e-10 * max(1.0, np.abs(q[i]).max()),
                 f"generator row sum must be 0 (row {i} sums to {s})")
        for j in range(m):
            if i != j:
                _require(q[i, j] >= 0, f"off-diagonal generator entry q[{i},{j}] must be >= 0")

    costs = config["costs"]
    _require(isinstance(costs, dict) and "c" in costs and "d" in costs,
             "costs must contain fields 'c' and 'd'")
    c = float(costs["c"])
    d = float(costs["d"])
    _require(0.0 <= c < 1.0, f"cost c must be in [0,1) (got {c})")
    _require(d >= 0.0, f"cost d must be >= 0 (got {d})")

    l_bar = float(config["l_bar"])
    _require(l_bar >= 0.0, f"l_bar must be >= 0 (got {l_bar})")

    for name, dr in zip(names, drifts):
        _require(dr(0.0) >= 0, f"drift at 0 must be nonnegative (regime {name})")

    return RegimeModel(
        regimes=tuple(names),
        q_matrix=q,
        delta=np.array(deltas),
        drift=tuple(drifts),
        vol=tuple(vols),
        cost_c=c,
        cost_d=d,
        l_bar=l_bar,
    )


def model_to_config(model: RegimeModel) -> dict:
    """Inverse of build_model (round-trips all fields)."""
    regs = []
    for k, name in enumerate(model.regimes):
        dr, vo = model.drift[k], model.vol[k]
        drift = {"kind": dr.kind, "a": dr.a}
        if dr.kind == "affine":
            drift["k"] = dr.k
        vol = {"kind": vo.kind, "s": vo.s}
        if vo.kind == "affine":
            vol["r"] = vo.r
        regs.append({"name": name, "delta": float(model.delta[k]),
                     "drift": drift, "vol": vol})
    return {
        "regimes": regs,
        "q_matrix": [[float(v) for v in row] for row in model.q_matrix],
        "costs": {"c": model.cost_c, "d": model.cost_d},
        "l_bar": model.l_bar,
    }


def validate_model(model: RegimeModel, x_max: float, grid_n: int) -> ValidationReport:
    """Check all grid-level standing assumptions on [0, x_max].

    Violations are reported, never raised.  Supported families make the
    boundedness requirement structural; the report records which family each
    regime uses.
    """
    if not (x_max > 0):
        raise ValueError("x_max must be positive")
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    x = np.linspace(0.0, x_max, grid_n + 1)
    rep = ValidationReport(passed=True)
    for k, name in enumerate(model.regimes):
        rep.families[name] = {"drift": model.drift[k].kind, "vol": model.vol[k].kind}
        # Condition 2: drift slope bounded by the discount rate (exact for the families)
        kslope = model.drift[k].k
        if kslope > model.delta[k] + 1e-12:
            rep.violations.append(("condition2", name, 0.0, kslope))
        # drift concavity holds exactly for affine families (second derivative 0)
        sig = model.vol[k](x)
        bad = np.where(sig < SIGMA_FLOOR)[0]
        if bad.size:
            rep.violations.append(("sigma_floor", name, float(x[bad[0]]), float(sig[bad[0]])))
        if model.drift[k](0.0) < 0:
            rep.violations.append(("drift_at_zero", name, 0.0, float(model.drift[k](0.0))))
    if model.l_bar == 0.0:
        rep.violations.append(("degenerate_l_bar", "*", 0.0, 0.0))
    rep.passed = not rep.violations
    return rep


def value_upper_bound(model: RegimeModel) -> float:
    """Uniform bound l_bar / (min_i delta_i * (1 + d)) on any candidate value."""
    return model.l_bar / (model.delta.min() * (1.0 + model.cost_d))


def default_x_max(model: RegimeModel) -> float:
    """Domain size rule: large enough that the tail of every regime's return
    function decays below 1e-8 over the outer half of the domain, and at
    least 10 growth lengths of the no-dividend solution."""
    lo = 0.0
    hi = 0.0
    for k in range(model.m):
        sig2 = float(model.vol[k](0.0)) ** 2
        mu0 = float(model.drift[k](0.0))
        rate = model.delta[k] + model.q_out[k]
        # positive root of (sig2/2) t^2 + mu0 t - rate = 0
        th_plus = (-mu0 + math.sqrt(mu0 * mu0 + 2.0 * sig2 * rate)) / sig2
        # negative root of (sig2/2) t^2 + (mu0 - l_bar) t - rate = 0
        a = mu0 - model.l_bar
        th_minus = (-a - math.sqrt(a * a + 2.0 * sig2 * rate)) / sig2
        lo = max(lo, 10.0 / th_plus)
        hi = max(hi, 2.0 * math.log(1e8) / abs(th_minus))
    return max(lo, hi)


def load_config(path) -> tuple[RegimeModel, Numerics, SimParams]:
    """Read a YAML configuration file and build the model plus numerics and
    simulation settings (the latter two have documented defaults)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
    model = build_model(doc)
    num = doc.get("numerics", {}) or {}
    sim = doc.get("simulation", {}) or {}
    numerics = Numerics(
        x_max=None if num.get("x_max") is None else float(num["x_max"]),
        grid_n=int(num.get("grid_n", 2000)),
        tol=float(num.get("tol", 1e-8)),
        b_tol=None if num.get("b_tol") is None else float(num["b_tol"]),
    )
    simulation = SimParams(
        paths=int(sim.get("paths", 100_000)),
        dt=float(sim.get("dt", 1e-3)),
        horizon=float(sim.get("horizon", 100.0)),
        seed=int(sim.get("seed", 0)),
    )
    return model, numerics, simulation
