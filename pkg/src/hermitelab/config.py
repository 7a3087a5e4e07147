"""Versioned experiment configuration shared by the command-line driver.

A config file is JSON of the form::

    {"schema_version": 1, "subcommand": "scan-scaling", "name": "optional-run-name",
     "params": {"q": 2, "H": 0.8, ...}}

Unknown keys are rejected at every level. Command-line flags override file
values, which override the defaults below.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

SCHEMA_VERSION = 1
TOP_LEVEL_KEYS = {"schema_version", "subcommand", "name", "params"}
STRING_KEYS = {"format", "quantity", "method"}


class ConfigError(ValueError):
    pass


def _exp_kernel() -> dict:
    return {"kind": "exponential", "rate": 1.0}


@dataclass
class SimulateParams:
    q: int = 1
    H: float = 0.7
    kernel: Any = None  # None: the driving Hermite process itself
    t_max: float = 64.0
    dt: float = 0.25
    internal_per_step: int = 8
    seed: int = 0
    stream: int = 0
    format: str = "csv"


@dataclass
class ScanParams:
    q: int = 1
    H: float = 0.55
    kernel: dict = field(default_factory=_exp_kernel)
    polynomial: Any = "0,0,1"
    T_grid: list = field(default_factory=lambda: [2.0 ** k for k in range(8, 14)])
    replications: int = 500
    seed: int = 0
    dt: float = 0.5
    internal_per_step: int = 4
    t_points: list = field(default_factory=lambda: [0.25, 0.5, 1.0])
    pilot_paths: int = 8
    plot: bool = True


@dataclass
class RankParams:
    polynomial: Any = "0,0,0,1"
    variance: Any = 1


@dataclass
class ConstantsParams:
    quantity: str = "c_Hq"
    q: int = 2
    H: float = 0.8
    kernel: dict = field(default_factory=_exp_kernel)
    polynomial: Any = "0,0,1"
    n: int = 2
    alpha: Any = None
    method: str = "auto"
    n_samples: int = 400_000
    seed: int = 0
    include_beta: bool = False
    lag: float = 0.0
    rate: float = 1.0


@dataclass
class PowerCountParams:
    dimension: int = 1
    functionals: list = field(default_factory=lambda: [[1]])
    exponents: list = field(default_factory=lambda: [["-1", "-2"]])
    bounded: bool = False
    dedupe: bool = True
    oracle: bool = False
    levels: int = 4
    base: float = 256.0


@dataclass
class HouParams:
    q: int = 2
    H: float = 0.7
    rate: float = 1.0
    polynomial: Any = "0,0,1"
    T: float = 16384.0
    dt: float = 0.25
    internal_per_step: int = 8
    replications: int = 100
    seed: int = 0


@dataclass
class CombinatoricsParams:
    n: int = 2
    q: int = 2
    order: Any = None


PARAMS = {
    "simulate": SimulateParams,
    "scan-scaling": ScanParams,
    "rank": RankParams,
    "constants": ConstantsParams,
    "power-count": PowerCountParams,
    "hou": HouParams,
    "combinatorics": CombinatoricsParams,
}


def _check_type(name: str, value, default):
    """Coerce ``value`` to the type of ``default`` where that is unambiguous."""
    if name in STRING_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string, got {value!r}")
        return value
    if default is None or isinstance(default, str):
        # free-form fields (polynomials, kernels, indices) are validated when built
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{name} must be a finite number, got {value!r}")
        return float(value)
    if isinstance(default, list) and not isinstance(value, list):
        raise ConfigError(f"{name} must be a list")
    if isinstance(default, dict) and not isinstance(value, dict):
        raise ConfigError(f"{name} must be an object")
    return value


@dataclass
class ExperimentConfig:
    subcommand: str
    params: Any
    name: str | None = None
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, data: dict, overrides: dict | None = None, subcommand: str | None = None) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - TOP_LEVEL_KEYS
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        sub = subcommand or data.get("subcommand")
        if data.get("subcommand") not in (None, sub):
            raise ConfigError(f"config is for {data['subcommand']!r}, not {sub!r}")
        if sub not in PARAMS:
            raise ConfigError(f"unknown subcommand {sub!r}")
        kind = PARAMS[sub]
        raw = dict(data.get("params", {}))
        raw.update(overrides or {})
        names = {f.name for f in dataclasses.fields(kind)}
        unknown = set(raw) - names
        if unknown:
            raise ConfigError(f"unknown {sub} parameters: {sorted(unknown)}")
        defaults = kind()
        values = {k: _check_type(k, v, getattr(defaults, k)) for k, v in raw.items()}
        name = data.get("name")
        if name is not None and (not isinstance(name, str) or not name or "/" in name or name.startswith(".")):
            raise ConfigError(f"invalid run name {name!r}")
        return cls(sub, kind(**values), name, version)

    @classmethod
    def load(cls, path, overrides: dict | None = None, subcommand: str | None = None) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data, overrides, subcommand)

    def to_json(self) -> dict:
        out = {"schema_version": self.schema_version, "subcommand": self.subcommand,
               "params": jsonable(dataclasses.asdict(self.params))}
        if self.name is not None:
            out["name"] = self.name
        return out

    @property
    def digest(self) -> str:
        return hashlib.sha256(dumps(self.to_json()).encode()).hexdigest()[:12]

    @property
    def run_name(self) -> str:
        return self.name or f"{self.subcommand}-{self.digest}"


def jsonable(obj):
    """Plain JSON types; floats keep their shortest round-trip repr."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"


def parse_flag_value(text: str):
    """Flag values are JSON when they parse as JSON, plain strings otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text
