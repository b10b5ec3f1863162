"""Flat ``key = value`` experiment configuration.

Every key has a type and a default. Model-dependent keys (market and jump
parameters, sweep ranges) default to ``None`` and are filled in from the
selected model when the config is resolved, so a dumped config always lists
concrete values and re-parses to the same experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional

from .errors import ConfigError, DomainError
from .market import ConstantJump, KouJump, MarketParams, MertonJump
from .simulation import SimConfig
from .utility import UtilityParams

MODELS = ("constant", "kou", "merton")

MODEL_DEFAULTS = {
    "constant": {"market.excess": 0.20, "market.sigma": 0.30, "jump.lam": 11.0, "jump.gamma_tilde": -0.03},
    "kou": {
        "market.excess": 0.24, "market.sigma": 0.26, "jump.lam": 20.0,
        "jump.p": 0.72, "jump.eta_plus": 64.94, "jump.eta_minus": 49.02,
    },
    "merton": {
        "market.excess": 0.09, "market.sigma": 0.35, "jump.lam": 20.0,
        "jump.mu_j": -0.01, "jump.sigma_j": 0.15,
    },
}

MODEL_JUMP_KEYS = {
    "constant": ("lam", "gamma_tilde"),
    "kou": ("lam", "p", "eta_plus", "eta_minus"),
    "merton": ("lam", "mu_j", "sigma_j"),
}

# default sweep ranges (start, stop) per parameter
SWEEP_RANGES = {
    "excess": (0.0, 0.4),
    "sigma": (0.1, 0.6),
    "r": (0.0, 0.1),
    "delta1": (0.1, 0.9),
    "lam": (1.0, 40.0),
    "gamma_tilde": (-0.2, -0.005),
    "p": (0.05, 0.95),
    "eta_plus": (5.0, 100.0),
    "eta_minus": (5.0, 100.0),
    "mu_j": (-0.1, 0.05),
    "sigma_j": (0.05, 0.3),
}


def _float(s: str) -> float:
    v = float(s)
    if math.isnan(v):
        raise ValueError("nan is not allowed")
    return v


def _int(s: str) -> int:
    return int(s, 10)


def _str(s: str) -> str:
    if not s:
        raise ValueError("empty string")
    return s


def _floats(s: str) -> tuple:
    items = [x.strip() for x in s.split(",") if x.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(_float(x) for x in items)


def _opt(parse):
    def inner(s: str):
        return None if s.lower() in ("", "none", "auto") else parse(s)

    inner.__name__ = f"optional {parse.__name__.lstrip('_')}"
    return inner


_ofloat = _opt(_float)
_ostr = _opt(_str)

# key -> (parser, default)
SCHEMA: dict[str, tuple[Any, Any]] = {
    "model": (_str, "constant"),
    "market.excess": (_ofloat, None),
    "market.sigma": (_ofloat, None),
    "market.r": (_float, 0.035),
    "jump.lam": (_ofloat, None),
    "jump.gamma_tilde": (_ofloat, None),
    "jump.p": (_ofloat, None),
    "jump.eta_plus": (_ofloat, None),
    "jump.eta_minus": (_ofloat, None),
    "jump.mu_j": (_ofloat, None),
    "jump.sigma_j": (_ofloat, None),
    "utility.delta1": (_float, 0.6),
    "utility.delta2": (_float, 0.5),
    "utility.lambda_tilde": (_float, 2.25),
    "utility.G": (_float, 100.0),
    "sim.paths": (_int, 10_000),
    "sim.T": (_float, 10.0),
    "sim.n_grid": (_int, 2500),
    "sim.seed": (_int, 0),
    "sim.c0": (_float, 20.0),
    "sim.workers": (_int, 1),
    "sim.m": (_ofloat, None),
    "sim.levels": (_floats, (0.0, 0.5, 0.99)),
    "sweep.param": (_str, "lam"),
    "sweep.start": (_ofloat, None),
    "sweep.stop": (_ofloat, None),
    "sweep.steps": (_int, 50),
    "gap.paths": (_int, 100_000),
    "gap.T": (_floats, (1.0, 5.0, 10.0)),
    "gap.sigma": (_floats, (0.05, 0.075, 0.10, 0.125, 0.15)),
    "gap.law": (_str, "additive"),
    "verify.paths": (_int, 100_000),
    "verify.T": (_float, 1.0),
    "verify.identity_paths": (_int, 1000),
    "verify.identity_grid": (_int, 250),
    "verify.grid_points": (_int, 41),
    "backtest.prices": (_ostr, None),
    "backtest.m": (_float, 10.0),
    "backtest.protection": (_float, 0.9),
    "backtest.v0": (_float, 100.0),
    "backtest.compounding": (_str, "simple"),
    "backtest.rebalance_every": (_int, 1),
    "concavify.points": (_int, 201),
    "concavify.x_max": (_ofloat, None),
}


def format_value(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=lambda: {k: d for k, (_, d) in SCHEMA.items()})

    def __getitem__(self, key: str):
        return self.values[key]

    def set(self, key: str, raw: str, where: str = "--set") -> None:
        if key not in SCHEMA:
            raise ConfigError(f"{where}: unknown key {key!r}")
        parse = SCHEMA[key][0]
        try:
            self.values[key] = parse(raw.strip())
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value {raw!r} for {key} ({exc})") from None

    # model-dependent defaults

    def resolved(self) -> "ExperimentConfig":
        """Copy with every ``auto`` market, jump and sweep value filled in for the model."""
        model = self.values["model"]
        if model not in MODELS:
            raise ConfigError(f"model must be one of {', '.join(MODELS)}, got {model!r}")
        out = dict(self.values)
        for key, val in MODEL_DEFAULTS[model].items():
            if out[key] is None:
                out[key] = val
        param = out["sweep.param"]
        if param not in sweepable(model):
            raise ConfigError(f"sweep.param {param!r} is not a parameter of the {model} model")
        lo, hi = SWEEP_RANGES[param]
        if out["sweep.start"] is None:
            out["sweep.start"] = lo
        if out["sweep.stop"] is None:
            out["sweep.stop"] = hi
        return ExperimentConfig(out)

    def dump(self) -> str:
        res = self.resolved()
        lines = [f"{k} = {format_value(v)}" for k, v in res.values.items()]
        return "\n".join(lines) + "\n"

    # typed views

    def market(self) -> MarketParams:
        v = self.resolved().values
        return _build(MarketParams.from_excess, "market", v["market.excess"], v["market.sigma"], r=v["market.r"])

    def jump(self):
        v = self.resolved().values
        model = v["model"]
        kw = {k: v[f"jump.{k}"] for k in MODEL_JUMP_KEYS[model]}
        cls = {"constant": ConstantJump, "kou": KouJump, "merton": MertonJump}[model]
        return _build(cls, "jump", **kw)

    def utility(self) -> UtilityParams:
        v = self.values
        return _build(
            UtilityParams, "utility", v["utility.delta1"], v["utility.delta2"], v["utility.lambda_tilde"], v["utility.G"]
        )

    def sim(self, **override) -> SimConfig:
        v = self.values
        kw = dict(n_paths=v["sim.paths"], T=v["sim.T"], n_grid=v["sim.n_grid"], seed=v["sim.seed"],
                  c0=v["sim.c0"], G=v["utility.G"], workers=v["sim.workers"])
        kw.update(override)
        return SimConfig(**kw)


def sweepable(model: str) -> tuple:
    return ("excess", "sigma", "r", "delta1") + MODEL_JUMP_KEYS[model]


def _build(ctor, section, *args, **kw):
    try:
        return ctor(*args, **kw)
    except DomainError as exc:
        raise ConfigError(f"invalid {section} parameters: {exc}") from None


def parse_text(text: str, source: str = "<config>", base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        cfg.set(key, val, where=f"{source}:{lineno}")
    return cfg


def load(path: Optional[str] = None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
        cfg = parse_text(text, str(path), cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        cfg.set(key.strip(), val, where=f"--set {item}")
    return cfg
