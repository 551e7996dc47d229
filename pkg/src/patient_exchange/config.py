"""YAML run configuration.

Every run is described by one document with optional sections ``market``,
``solver``, ``simulation``, ``inelastic`` and ``two_price``; whatever is
missing falls back to :data:`DEFAULTS`, which reproduces the 50-tick
elastic-demand example.  See README.md for the field list.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np
import yaml

from .equilibrium import TwoPriceProblem
from .inelastic import InelasticParams
from .market import DemandCurve, MarketConfig, PatienceDistribution

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "market": {
        "lambda": 3.0,
        "mu": 12.0,
        "epsilon": 1.0,
        "n_ticks": 50,
        "demand": {"formula": "quadratic", "scale": 1 / 12, "base": 0.5, "width": 15.0, "beta": None},
        "patience": {"kind": "uniform", "delta_bar": 160.0, "gamma": 1.0, "table": None},
    },
    "solver": {"tol": 1e-8, "max_iter": 20000, "n_restarts": 20, "eta": 0.5},
    "simulation": {
        "horizon": 1_000_000,
        "warmup_fraction": 0.2,
        "n_batches": 20,
        "discipline": "fifo",
        "mode": "alpha",
        "alpha": None,
        "min_trades": 1000,
        "rel_tol": 0.05,
    },
    "inelastic": {
        "rho": 0.5,
        "mu": 12.0,
        "delta_bar": 160.0,
        "gamma": 1.0,
        "p_max": None,
        "n_points": 2001,
        "s_values": [0.0, 1.0, 2.0, 5.0],
    },
    "two_price": {
        "p1": 1.0,
        "p2": 1.5,
        "mu1": 2.0,
        "mu2": 1.0,
        "patience": {"kind": "uniform", "delta_bar": 1.0, "gamma": 1.0, "table": None},
    },
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, update: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in (update or {}).items():
        where = f"{path}{key}"
        if key not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(out[key], dict) and isinstance(val, dict):
            out[key] = _merge(out[key], val, where + ".")
        else:
            out[key] = val
    return out


def apply_override(cfg: dict, assignment: str) -> None:
    """Apply ``dotted.key=value``; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not key=value")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"unknown config key {key!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = yaml.safe_load(raw)


def load(path: Optional[str | Path] = None, overrides: Iterable[str] = ()) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        with open(path) as fh:
            doc = yaml.safe_load(fh) or {}
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a mapping")
        cfg = _merge(cfg, doc)
    for ov in overrides:
        apply_override(cfg, ov)
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _num(section: dict, key: str, where: str) -> float:
    try:
        return float(section[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key} must be a number, got {section[key]!r}") from None


def patience_from_dict(d: dict, where: str = "patience") -> PatienceDistribution:
    kind = str(d.get("kind", "uniform")).lower()
    if kind == "uniform":
        return PatienceDistribution.uniform(_num(d, "delta_bar", where))
    if kind == "power":
        return PatienceDistribution.power(_num(d, "delta_bar", where), _num(d, "gamma", where))
    if kind == "tabulated":
        table = np.asarray(d.get("table"), dtype=float)
        if table.ndim != 2 or table.shape[1] != 2:
            raise ConfigError(f"{where}.table must be a list of [x, F] pairs")
        return PatienceDistribution.tabulated(table[:, 0], table[:, 1])
    raise ConfigError(f"{where}.kind must be uniform, power or tabulated")


def market_from_dict(cfg: dict) -> MarketConfig:
    m = cfg["market"]
    n = int(m["n_ticks"])
    dem = m["demand"]
    if dem.get("beta") is not None:
        demand = DemandCurve(np.asarray(dem["beta"], dtype=float))
    elif str(dem.get("formula", "")).lower() == "quadratic":
        demand = DemandCurve.quadratic(n, _num(dem, "scale", "demand"), _num(dem, "base", "demand"), _num(dem, "width", "demand"))
    elif str(dem.get("formula", "")).lower() == "constant":
        demand = DemandCurve.constant(n, float(dem.get("value", 1.0)))
    else:
        raise ConfigError("market.demand needs either beta: [...] or formula: quadratic|constant")
    return MarketConfig(
        lam=_num(m, "lambda", "market"),
        mu=_num(m, "mu", "market"),
        epsilon=_num(m, "epsilon", "market"),
        n_ticks=n,
        demand=demand,
        patience=patience_from_dict(m["patience"], "market.patience"),
    )


def inelastic_from_dict(cfg: dict) -> InelasticParams:
    s = cfg["inelastic"]
    return InelasticParams(
        rho=_num(s, "rho", "inelastic"),
        mu=_num(s, "mu", "inelastic"),
        delta_bar=_num(s, "delta_bar", "inelastic"),
        gamma=_num(s, "gamma", "inelastic"),
    )


def two_price_from_dict(cfg: dict) -> TwoPriceProblem:
    s = cfg["two_price"]
    return TwoPriceProblem(
        p1=_num(s, "p1", "two_price"),
        p2=_num(s, "p2", "two_price"),
        mu1=_num(s, "mu1", "two_price"),
        mu2=_num(s, "mu2", "two_price"),
        patience=patience_from_dict(s["patience"], "two_price.patience"),
    )
