"""Run configuration: JSON schema, semantic checks and data loading.

A configuration is validated in full (schema first, then cross-field and
file checks) before any computation starts.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from . import data as D
from .backtest import GRID_KEYS, MANAGER, Analyst, BacktestConfig, Market, check_theta0_spec
from .core import SIMPLEX_TOL

DATA_DIR_ENV = "RISKQUAD_DATA_DIR"

_DATE = {"type": "string", "pattern": r"^\d{4}-\d{2}-\d{2}$"}
_THETA0 = {
    "oneOf": [
        {"type": "number"},
        {
            "type": "object",
            "properties": {"month": {"type": "string", "pattern": r"^\d{4}-\d{2}$"}},
            "required": ["month"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"cumulative": {"type": "number"}, "days": {"type": "integer", "minimum": 1}},
            "required": ["cumulative", "days"],
            "additionalProperties": False,
        },
    ]
}
_MODE = {"enum": ["equality", "at_least"]}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "riskquad run configuration",
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "data": {
            "type": "object",
            "properties": {
                "prices": {"type": "string"},
                "index": {"type": "string"},
                "macro": {"type": "object", "additionalProperties": {"type": "string"}},
            },
            "required": ["macro"],
            "additionalProperties": False,
        },
        "fetch": {
            "type": "object",
            "properties": {
                "endpoint": {"type": "string", "pattern": r"\{ticker\}"},
                "tickers": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "start": _DATE,
                "end": _DATE,
                "timeout": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["endpoint", "tickers", "start", "end"],
            "additionalProperties": False,
        },
        "universe": {"type": "string", "minLength": 1},
        "universes": {"type": "object", "additionalProperties": {"type": "string"}},
        "indices": {"type": "object", "additionalProperties": {"type": "string"}},
        "analysts": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "rule": {"enum": list(D.INDICATORS)},
                    "source": {"type": "string"},
                    "weight": {"type": "number", "minimum": 0},
                    "mask": {"type": "array", "items": {"type": "boolean"}},
                },
                "required": ["name", "rule", "weight"],
                "additionalProperties": False,
            },
        },
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "window": {"type": "integer", "minimum": 2},
        "cutoff": _DATE,
        "end": _DATE,
        "theta0": _THETA0,
        "risk_free": {"type": "number"},
        "manager_mode": _MODE,
        "analyst_mode": _MODE,
        "periods_per_year": {"type": "integer", "minimum": 1},
        "rf_compounding": {"enum": ["arithmetic", "geometric"]},
        "downside": {"enum": ["full", "below_only"]},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer"},
        "out": {"type": "string"},
        "regimes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"name": {"type": "string", "minLength": 1}, "cutoff": _DATE, "end": _DATE, "theta0": _THETA0},
                "required": ["name", "cutoff", "theta0"],
                "additionalProperties": False,
            },
        },
        "sensitivity": {
            "type": "object",
            "properties": {
                "window": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
                "alpha": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}, "minItems": 1},
                "theta0_scale": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "universe": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "mode": {"enum": ["product", "one_at_a_time"]},
            },
            "additionalProperties": False,
        },
    },
    "required": ["analysts", "alpha", "window", "cutoff", "theta0"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Configuration that fails the schema or a semantic check."""


@dataclass
class RunConfig:
    doc: dict
    path: Path
    root: Path  # data paths resolve against this directory

    @property
    def name(self) -> str:
        return self.doc.get("name", self.path.stem)

    @property
    def seed(self) -> int:
        return int(self.doc.get("seed", 0))

    @property
    def base_universe(self) -> str:
        return self.doc.get("universe", "default")

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.root / p

    def universe_paths(self) -> dict:
        out = dict(self.doc.get("universes", {}))
        prices = self.doc.get("data", {}).get("prices")
        if prices is not None:
            out.setdefault(self.base_universe, prices)
        return out

    def index_paths(self) -> dict:
        out = dict(self.doc.get("indices", {}))
        idx = self.doc.get("data", {}).get("index")
        if idx is not None:
            out.setdefault(self.base_universe, idx)
        return out

    def regimes(self) -> list:
        """(name, cutoff, end, theta0) for each regime; one unnamed regime by default."""
        if "regimes" in self.doc:
            return [(g["name"], g["cutoff"], g.get("end"), g["theta0"]) for g in self.doc["regimes"]]
        return [("", self.doc["cutoff"], self.doc.get("end"), self.doc["theta0"])]

    def backtest_config(self, regime=None) -> BacktestConfig:
        d = self.doc
        name, cutoff, end, theta0 = regime or self.regimes()[0]
        analysts = tuple(
            Analyst(
                a["name"],
                D.AnalystRule(a["rule"], a.get("source", ""), tuple(a["mask"]) if "mask" in a else None),
                float(a["weight"]),
            )
            for a in d["analysts"]
        )
        kw = {k: d[k] for k in ("risk_free", "manager_mode", "analyst_mode", "periods_per_year", "rf_compounding", "downside", "tol") if k in d}
        return BacktestConfig(
            cutoff=cutoff,
            window=d["window"],
            alpha=float(d["alpha"]),
            theta0=theta0,
            analysts=analysts,
            end=end,
            universe=self.base_universe,
            regime=name,
            **kw,
        )

    def sensitivity(self) -> tuple[dict, str]:
        s = dict(self.doc.get("sensitivity", {}))
        mode = s.pop("mode", "product")
        return s, mode


def load_config(path, data_dir: str | None = None, fetch: bool = False) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as e:
        raise D.DataError(f"cannot read config {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from None
    root = data_dir if data_dir is not None else os.environ.get(DATA_DIR_ENV)
    cfg = RunConfig(doc, path, Path(root) if root else path.parent)
    validate(cfg, fetch=fetch)
    return cfg


def validate(cfg: RunConfig, fetch: bool = False) -> None:
    """Schema validation followed by the checks a schema cannot express."""
    doc = cfg.doc
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config {where}: {e.message}") from None

    weights = [a["weight"] for a in doc["analysts"]]
    if abs(math.fsum(weights) - 1.0) > SIMPLEX_TOL:
        raise ConfigError(f"analyst weights sum to {math.fsum(weights)!r}, not 1")
    names = [a["name"] for a in doc["analysts"]]
    if len(set(names)) != len(names) or MANAGER in names:
        raise ConfigError(f"analyst names must be unique and differ from {MANAGER!r}")
    for a in doc["analysts"]:
        if a["rule"] == "custom_mask":
            if "mask" not in a:
                raise ConfigError(f"{a['name']}: custom_mask needs a mask")
        elif not a.get("source"):
            raise ConfigError(f"{a['name']}: rule {a['rule']} needs a macro source")
        elif a["source"] not in doc.get("data", {}).get("macro", {}):
            raise ConfigError(f"{a['name']}: macro source {a['source']!r} is not listed under data.macro")
    for spec in [doc["theta0"]] + [g["theta0"] for g in doc.get("regimes", [])]:
        try:
            check_theta0_spec(spec)
        except ValueError as e:
            raise ConfigError(str(e)) from None
    regimes = [g["name"] for g in doc.get("regimes", [])]
    if len(set(regimes)) != len(regimes):
        raise ConfigError("regime names must be unique")

    universes = cfg.universe_paths()
    sens = doc.get("sensitivity", {})
    for u in sens.get("universe", []):
        if u not in universes:
            raise ConfigError(f"sensitivity universe {u!r} has no price file")
    for u in cfg.index_paths():
        if u not in universes and not (fetch and u == cfg.base_universe):
            raise ConfigError(f"index given for unknown universe {u!r}")
    if fetch:
        if "fetch" not in doc:
            raise ConfigError("--fetch needs a 'fetch' section in the config")
    elif cfg.base_universe not in universes:
        raise ConfigError("no price file for the base universe (set data.prices or use --fetch)")

    # paths exist at validation time
    files = list(universes.values()) + list(cfg.index_paths().values()) + list(doc.get("data", {}).get("macro", {}).values())
    for rel in files:
        p = cfg.resolve(rel)
        if not p.is_file():
            raise D.DataError(f"missing data file {p}")

    try:
        cfg.backtest_config()
        for g in cfg.regimes():
            cfg.backtest_config(g)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def load_market(cfg: RunConfig, fetch: bool = False) -> Market:
    """Read every price, index and macro file named by the configuration."""
    doc = cfg.doc
    universes, indices = {}, {}
    for u, rel in sorted(cfg.universe_paths().items()):
        universes[u] = D.load_prices(cfg.resolve(rel))
    if fetch:
        f = doc["fetch"]
        universes[cfg.base_universe] = D.fetch_prices(f["endpoint"], f["tickers"], f["start"], f["end"], f.get("timeout", 30.0))
    for u, rel in sorted(cfg.index_paths().items()):
        indices[u] = D.load_prices(cfg.resolve(rel))
    macro = {k: D.load_macro(cfg.resolve(rel), k) for k, rel in sorted(doc.get("data", {}).get("macro", {}).items())}
    return Market(universes, macro, indices)


def parse_override(text: str) -> tuple[str, list]:
    """``KEY=v1,v2,...`` into a key and a typed value list."""
    key, sep, vals = text.partition("=")
    key = key.strip().replace("-", "_")
    if key in ("T", "t"):
        key = "window"
    if key == "theta0":
        key = "theta0_scale"
    if not sep or key not in GRID_KEYS:
        raise ConfigError(f"bad override {text!r}: expected KEY=v1,v2 with KEY in {', '.join(GRID_KEYS)}")
    items = [v.strip() for v in vals.split(",") if v.strip()]
    if not items:
        raise ConfigError(f"override {key} has no values")
    try:
        if key == "window":
            out = [int(v) for v in items]
        elif key == "universe":
            out = items
        else:
            out = [float(v) for v in items]
    except ValueError:
        raise ConfigError(f"bad value in override {text!r}") from None
    if key == "window" and any(v < 2 for v in out):
        raise ConfigError("window overrides must be >= 2")
    if key == "alpha" and any(not 0 < v < 1 for v in out):
        raise ConfigError("alpha overrides must lie in (0, 1)")
    if key == "theta0_scale" and any(not (math.isfinite(v) and v > 0) for v in out):
        raise ConfigError("theta0_scale overrides must be positive")
    return key, out
