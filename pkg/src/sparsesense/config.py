"""TOML experiment configuration.

Sections and keys (all optional)::

    [model]   p, ridge, refresh, window, predictor, stabilize
    [weights] strategy, rank, nmf_iters, bandwidth, per_lag
    [alloc]   strategy, k, eta, tu_window, hazard_threshold, static_ids,
              loss_scope, sim_reversed
    [sim]     cycles, warmup, seed, sparsity
    [report]  pooled
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import ConfigError, ParseError
from .dsar import DsarConfig
from .simulate import AllocConfig, HotspotSpec, SimulationConfig, SyntheticSpec, WeightsConfig

log = logging.getLogger(__name__)

INT, FLOAT, BOOL, STR, INTLIST = "int", "float", "bool", "str", "int list"

SCHEMA = {
    "model": {"p": INT, "ridge": FLOAT, "refresh": INT, "window": INT, "predictor": STR, "stabilize": BOOL},
    "weights": {"strategy": STR, "rank": INT, "nmf_iters": INT, "bandwidth": FLOAT, "per_lag": BOOL},
    "alloc": {
        "strategy": STR,
        "k": INT,
        "eta": FLOAT,
        "tu_window": INT,
        "hazard_threshold": FLOAT,
        "static_ids": INTLIST,
        "loss_scope": STR,
        "sim_reversed": BOOL,
    },
    "sim": {"cycles": INT, "warmup": INT, "seed": INT, "sparsity": FLOAT},
    "report": {"pooled": BOOL},
}

SYNTHETIC_SCHEMA = {
    "S": INT,
    "T": INT,
    "p": INT,
    "phi": FLOAT,  # scalar, or list checked separately
    "phi_range": "float pair",
    "weight_kind": STR,
    "bandwidth": FLOAT,
    "noise_sigma": FLOAT,
    "seed": INT,
}
HOTSPOT_SCHEMA = {"amplitude": FLOAT, "width": FLOAT, "step": FLOAT}


def _check_type(path: str, value, kind: str):
    ok = {
        INT: isinstance(value, int) and not isinstance(value, bool),
        FLOAT: isinstance(value, (int, float)) and not isinstance(value, bool),
        BOOL: isinstance(value, bool),
        STR: isinstance(value, str),
        INTLIST: isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value),
        "float pair": isinstance(value, list)
        and len(value) == 2
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value),
    }[kind]
    if not ok:
        raise ConfigError(f"{path}: expected {kind}, got {type(value).__name__} {value!r}")
    return float(value) if kind == FLOAT else value


def _load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _flatten(data: dict, schema: dict, strict: bool, source: str) -> dict:
    """Validate ``data`` against ``schema`` and return ``{section: {key: value}}``."""
    out = {section: {} for section in schema}
    for section, body in data.items():
        if section not in schema:
            _unknown(section, strict, source)
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"{section}: expected a table of keys")
        for key, value in body.items():
            path = f"{section}.{key}"
            if key not in schema[section]:
                _unknown(path, strict, source)
                continue
            out[section][key] = _check_type(path, value, schema[section][key])
    return out


def _unknown(path: str, strict: bool, source: str) -> None:
    if strict:
        raise ConfigError(f"{path}: unknown key in {source}")
    log.warning("ignoring unknown config key %s in %s", path, source)


def config_from_dict(data: dict, strict: bool = False, source: str = "<config>") -> SimulationConfig:
    v = _flatten(data, SCHEMA, strict, source)
    m, w, a, s, r = v["model"], v["weights"], v["alloc"], v["sim"], v["report"]
    try:
        model = DsarConfig(
            p=m.get("p", 2),
            ridge=m.get("ridge", 1e-3),
            weight_strategy=w.get("strategy", "nmf_cosine"),
            refresh_interval=m.get("refresh", 24),
            window=m.get("window", 48),
            stabilize=m.get("stabilize", True),
        )
        weights = WeightsConfig(
            rank=w.get("rank"),
            nmf_iters=w.get("nmf_iters", 200),
            bandwidth=w.get("bandwidth", 0.25),
            per_lag=w.get("per_lag", False),
        )
        alloc = AllocConfig(
            strategy=a.get("strategy", "ewiem"),
            k=a.get("k"),
            eta=a.get("eta", 0.1),
            tu_window=a.get("tu_window", 10),
            hazard_threshold=a.get("hazard_threshold", 150.0),
            static_ids=a.get("static_ids"),
            loss_scope=a.get("loss_scope", "unselected"),
            sim_reversed=a.get("sim_reversed", False),
        )
        return SimulationConfig(
            cycles=s.get("cycles"),
            warmup=s.get("warmup"),
            seed=s.get("seed", 0),
            sparsity=s.get("sparsity", 0.0),
            predictor=m.get("predictor", "dsar"),
            pooled=r.get("pooled", False),
            model=model,
            alloc=alloc,
            weights=weights,
        )
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def parse_config(path, strict: bool = False) -> SimulationConfig:
    """Read a TOML config file into a fully defaulted ``SimulationConfig``."""
    return config_from_dict(_load_toml(path), strict, str(path))


def config_checksum(cfg: SimulationConfig) -> str:
    """SHA-256 of the canonical JSON form of a resolved config."""
    blob = json.dumps(dataclasses.asdict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def parse_synthetic_spec(path, strict: bool = False) -> SyntheticSpec:
    data = _load_toml(path)
    body = dict(data.get("synthetic", data))
    hotspot_raw = body.pop("hotspot", None)
    kw = {}
    for key, value in body.items():
        if key not in SYNTHETIC_SCHEMA:
            _unknown(key, strict, str(path))
            continue
        if key == "phi" and isinstance(value, list):
            kw["true_phi"] = [_check_type(f"phi[{i}]", x, FLOAT) if not isinstance(x, list) else x for i, x in enumerate(value)]
        elif key == "phi":
            kw["true_phi"] = _check_type("phi", value, FLOAT)
        elif key == "phi_range":
            kw["phi_range"] = tuple(float(x) for x in _check_type(key, value, "float pair"))
        else:
            kw[key] = _check_type(key, value, SYNTHETIC_SCHEMA[key])
    if isinstance(kw.get("true_phi"), float):
        kw["true_phi"] = [kw["true_phi"]] * kw.get("S", 8) * kw.get("p", 1)
    if hotspot_raw is not None:
        hs = {}
        for key, value in hotspot_raw.items():
            if key not in HOTSPOT_SCHEMA:
                _unknown(f"hotspot.{key}", strict, str(path))
                continue
            hs[key] = _check_type(f"hotspot.{key}", value, FLOAT)
        kw["hotspot"] = HotspotSpec(**hs)
    try:
        return SyntheticSpec(**kw)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
