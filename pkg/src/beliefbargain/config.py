"""YAML experiment configuration.

Layout (every section except ``market``, ``agents`` and ``anchors`` is
optional)::

    market:
      payoffs: [1.0, 2.0]
    agents:
      seller: {wealth: 0.0, risk: 0.4, utility: exponential, risk_aversion: 2.0}
      buyer:  {wealth: 0.0, risk: 0.3, utility: exponential, risk_aversion: 1.0}
    anchors:
      seller: [0.25, 0.75]
      buyer:  [0.75, 0.25]
    penalty: {variant: lambda_dependent, epsilon: 0.1, lambda: 0.4, phi: quadratic}
    dynamics: {alpha: 0.05, max_periods: 100000, fixed_anchor: false, ...}
    sweep:
      kind: lambda            # or: risks
      provenance: dynamics    # or: continuation
      lambda: {start: 0.0, stop: 1.0, num: 21}
      r_a: [0.0, 0.1, 0.2]
      r_b: {start: 0.0, stop: 0.4, num: 41}
    output: {dir: out, prefix: run}
    seed: 0
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .dynamics import DynamicsConfig
from .errors import BargainError
from .functionals import PenaltyConfig, Variant
from .pricing import AgentSpec, MarketSpec, Side
from .utility import from_spec

ANCHOR_TOL = 1e-9


class ConfigError(BargainError, ValueError):
    """A configuration field is missing or violates a constraint."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _get(d, key, path, default=...):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected a mapping")
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
        return default
    return d[key]


def _num(v, path, lo=None, hi=None, lo_open=False, hi_open=False) -> float:
    # YAML 1.1 reads "1e-12" as a string, so numeric strings are accepted
    try:
        x = float(v)
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected a number, got {v!r}") from None
    if not math.isfinite(x):
        raise ConfigError(path, "must be finite")
    if lo is not None and (x < lo or (lo_open and x == lo)):
        raise ConfigError(path, f"must be {'>' if lo_open else '>='} {lo}, got {x}")
    if hi is not None and (x > hi or (hi_open and x == hi)):
        raise ConfigError(path, f"must be {'<' if hi_open else '<='} {hi}, got {x}")
    return x


def _int(v, path, lo=None) -> int:
    x = _num(v, path)
    if x != int(x):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if lo is not None and x < lo:
        raise ConfigError(path, f"must be >= {lo}, got {int(x)}")
    return int(x)


def _bool(v, path) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(path, f"expected true/false, got {v!r}")
    return v


def _vector(v, path) -> np.ndarray:
    if not isinstance(v, (list, tuple)):
        raise ConfigError(path, "expected a list of numbers")
    return np.array([_num(x, f"{path}[{i}]") for i, x in enumerate(v)])


def _grid(v, path) -> np.ndarray | None:
    if v is None:
        return None
    if isinstance(v, dict):
        start = _num(_get(v, "start", path), f"{path}.start")
        stop = _num(_get(v, "stop", path), f"{path}.stop")
        num = _int(_get(v, "num", path), f"{path}.num", lo=1)
        g = np.linspace(start, stop, num)
    else:
        g = _vector(v, path)
    if g.size == 0:
        raise ConfigError(path, "grid is empty")
    if g.size > 1 and not np.all(np.diff(g) > 0):
        raise ConfigError(path, "grid must be strictly increasing")
    return g


def _agent(d, side: Side, path) -> tuple[AgentSpec, dict]:
    wealth = _num(_get(d, "wealth", path, 0.0), f"{path}.wealth")
    risk = _num(_get(d, "risk", path), f"{path}.risk", lo=0.0)
    family = str(_get(d, "utility", path, "exponential"))
    a = _num(_get(d, "risk_aversion", path), f"{path}.risk_aversion", lo=0.0, lo_open=True)
    try:
        u = from_spec(family, a)
    except ValueError as exc:
        raise ConfigError(f"{path}.utility", str(exc)) from None
    echo = {"wealth": wealth, "risk": risk, "utility": family, "risk_aversion": a}
    return AgentSpec(side, wealth, risk, u), echo


def _anchor(v, k, path) -> np.ndarray:
    q = _vector(v, path)
    if q.size != k:
        raise ConfigError(path, f"has {q.size} states, market has {k}")
    if np.any(q < 0):
        raise ConfigError(path, "components must be nonnegative")
    if abs(q.sum() - 1.0) > ANCHOR_TOL:
        raise ConfigError(path, f"components sum to {q.sum():.12g}, expected 1")
    return q


@dataclass
class SweepAxes:
    kind: str = "lambda"
    provenance: str = "dynamics"
    lam: np.ndarray | None = None
    r_a: np.ndarray | None = None
    r_b: np.ndarray | None = None


@dataclass
class ExperimentConfig:
    market: MarketSpec
    seller: AgentSpec
    buyer: AgentSpec
    anchors: np.ndarray
    dynamics: DynamicsConfig
    sweep: SweepAxes = field(default_factory=SweepAxes)
    output_dir: str = "out"
    output_prefix: str = "run"
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def agents(self):
        return self.seller, self.buyer

    @property
    def penalty(self) -> PenaltyConfig:
        return self.dynamics.penalty

    def to_dict(self) -> dict:
        """Resolved configuration; ``parse_config(cfg.to_dict())`` rebuilds it."""
        return self.raw

    def with_overrides(self, seed=None, output_dir=None, **flags) -> "ExperimentConfig":
        """Apply command-line overrides by editing the resolved mapping and reparsing."""
        raw = copy.deepcopy(self.raw)
        if seed is not None:
            raw["seed"] = seed
        if output_dir is not None:
            raw["output"]["dir"] = str(output_dir)
        for key, value in flags.items():
            if value:
                raw["dynamics"][key] = True
        return parse_config(raw)

    def dump(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=False, default_flow_style=None)


def _floats(a):
    return [float(x) for x in a]


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a configuration mapping and build the experiment objects."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping")
    m = _get(data, "market", "")
    payoffs = _vector(_get(m, "payoffs", "market"), "market.payoffs")
    if payoffs.size < 2:
        raise ConfigError("market.payoffs", "need at least 2 states")
    if not payoffs.max() > payoffs.min():
        raise ConfigError("market.payoffs", "payoffs must be non-constant")
    market = MarketSpec(payoffs)
    ag = _get(data, "agents", "")
    seller, s_echo = _agent(_get(ag, "seller", "agents"), Side.SELLER, "agents.seller")
    buyer, b_echo = _agent(_get(ag, "buyer", "agents"), Side.BUYER, "agents.buyer")
    an = _get(data, "anchors", "")
    qa = _anchor(_get(an, "seller", "anchors"), market.k, "anchors.seller")
    qb = _anchor(_get(an, "buyer", "anchors"), market.k, "anchors.buyer")

    p = _get(data, "penalty", "", {}) or {}
    variant = str(_get(p, "variant", "penalty", Variant.LAMBDA_DEPENDENT.value))
    try:
        variant = Variant(variant)
    except ValueError:
        raise ConfigError("penalty.variant",
                          f"must be one of {[v.value for v in Variant]}, got {variant!r}") from None
    phi = str(_get(p, "phi", "penalty", "quadratic"))
    if phi != "quadratic":
        raise ConfigError("penalty.phi", f"only 'quadratic' is available, got {phi!r}")
    eps = _num(_get(p, "epsilon", "penalty", 0.1), "penalty.epsilon", lo=0.0, lo_open=True)
    lam = _num(_get(p, "lambda", "penalty", 0.5), "penalty.lambda", lo=0.0, hi=1.0)
    penalty = PenaltyConfig(eps, lam, variant)

    d = _get(data, "dynamics", "", {}) or {}
    dyn = DynamicsConfig(
        alpha=_num(_get(d, "alpha", "dynamics", 0.05), "dynamics.alpha", lo=0.0, hi=1.0,
                   lo_open=True, hi_open=True),
        penalty=penalty,
        step_solver_tol=_num(_get(d, "step_solver_tol", "dynamics", 1e-12),
                             "dynamics.step_solver_tol", lo=0.0, lo_open=True),
        step_solver_cap=_int(_get(d, "step_solver_cap", "dynamics", 500),
                             "dynamics.step_solver_cap", lo=1),
        convergence_tol=_num(_get(d, "convergence_tol", "dynamics", 1e-10),
                             "dynamics.convergence_tol", lo=0.0, lo_open=True),
        max_periods=_int(_get(d, "max_periods", "dynamics", 100_000), "dynamics.max_periods", lo=0),
        beta_scale=_num(_get(d, "beta_scale", "dynamics", 1.0), "dynamics.beta_scale",
                        lo=0.0, lo_open=True),
        fixed_anchor=_bool(_get(d, "fixed_anchor", "dynamics", False), "dynamics.fixed_anchor"),
        clamped_projection=_bool(_get(d, "clamped_projection", "dynamics", False),
                                 "dynamics.clamped_projection"),
        explicit_scheme=_bool(_get(d, "explicit_scheme", "dynamics", False),
                              "dynamics.explicit_scheme"),
    )

    sw = _get(data, "sweep", "", {}) or {}
    kind = str(_get(sw, "kind", "sweep", "lambda"))
    if kind not in ("lambda", "risks"):
        raise ConfigError("sweep.kind", f"must be 'lambda' or 'risks', got {kind!r}")
    default_prov = "dynamics" if kind == "lambda" else "continuation"
    prov = str(_get(sw, "provenance", "sweep", default_prov))
    if prov not in ("dynamics", "continuation"):
        raise ConfigError("sweep.provenance", f"must be 'dynamics' or 'continuation', got {prov!r}")
    axes = SweepAxes(kind, prov, _grid(sw.get("lambda"), "sweep.lambda"),
                     _grid(sw.get("r_a"), "sweep.r_a"), _grid(sw.get("r_b"), "sweep.r_b"))
    if axes.lam is not None and (axes.lam.min() < 0 or axes.lam.max() > 1):
        raise ConfigError("sweep.lambda", "values must lie in [0, 1]")
    for name in ("r_a", "r_b"):
        g = getattr(axes, name)
        if g is not None and g.min() < 0:
            raise ConfigError(f"sweep.{name}", "risk levels must be >= 0")

    out = _get(data, "output", "", {}) or {}
    seed = _int(_get(data, "seed", "", 0), "seed", lo=0)

    raw = {
        "market": {"payoffs": _floats(payoffs)},
        "agents": {"seller": s_echo, "buyer": b_echo},
        "anchors": {"seller": _floats(qa), "buyer": _floats(qb)},
        "penalty": {"variant": variant.value, "epsilon": eps, "lambda": lam, "phi": phi},
        "dynamics": {
            "alpha": dyn.alpha, "step_solver_tol": dyn.step_solver_tol,
            "step_solver_cap": dyn.step_solver_cap, "convergence_tol": dyn.convergence_tol,
            "max_periods": dyn.max_periods, "beta_scale": dyn.beta_scale,
            "fixed_anchor": dyn.fixed_anchor, "clamped_projection": dyn.clamped_projection,
            "explicit_scheme": dyn.explicit_scheme,
        },
        "sweep": {"kind": kind, "provenance": prov},
        "output": {"dir": str(out.get("dir", "out")), "prefix": str(out.get("prefix", "run"))},
        "seed": seed,
    }
    for name, g in (("lambda", axes.lam), ("r_a", axes.r_a), ("r_b", axes.r_b)):
        if g is not None:
            raw["sweep"][name] = _floats(g)

    return ExperimentConfig(market, seller, buyer, np.concatenate([qa, qb]), dyn, axes,
                            raw["output"]["dir"], raw["output"]["prefix"], seed, raw)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"invalid YAML: {exc}") from None
    return parse_config(data)
