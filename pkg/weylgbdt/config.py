"""
Configuration: the tolerances record, x/y grids and run-config documents.

Run configs are YAML or JSON (yaml.safe_load reads both) and are checked against
RUN_CONFIG_SCHEMA before anything numerical happens, so a bad document fails with a
ConfigError instead of half-way through a grid.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import jsonschema
import numpy as np
import yaml

from .errors import ConfigError


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-12
    triple_identity: float = 1e-12
    real_form: float = 1e-12
    sylvester_separation: float = 1e-8
    condition_limit: float = 1e12
    identity_residual: float = 1e-10
    cross_agreement: float = 1e-8
    quad_epsabs: float = 1e-12
    quad_epsrel: float = 1e-10
    growth_exponent_limit: float = 700.0
    u_consistency: float = 1e-10
    realness: float = 1e-10
    halfplane: float = 1e-10
    ode_tol: float = 1e-10
    drift_limit: float = 1e-6
    drift_report: float = 1e-8
    pde_step: float = 5e-4
    pde_residual: float = 1e-5
    pde_noise_floor: float = 1e-12
    order_low: float = 1.8
    order_high: float = 2.2

    def with_overrides(self, overrides: Optional[Mapping[str, Any]]) -> "Tolerances":
        if not overrides:
            return self
        known = {f.name for f in dataclasses.fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigError(f"unknown tolerance field(s): {', '.join(unknown)}")
        values = {}
        for key, value in overrides.items():
            try:
                v = float(value)
            except (TypeError, ValueError):
                raise ConfigError(f"tolerance {key} must be a number, got {value!r}")
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"tolerance {key} must be positive and finite")
            values[key] = v
        return dataclasses.replace(self, **values)

    def as_dict(self) -> Dict[str, float]:
        return dataclasses.asdict(self)


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class Grid:
    """Uniform grid min:max:step, endpoint included within half a step."""

    lo: float
    hi: float
    step: float

    def __post_init__(self):
        for v in (self.lo, self.hi, self.step):
            if not math.isfinite(v):
                raise ConfigError("grid bounds and step must be finite")
        if self.step <= 0:
            raise ConfigError(f"grid step must be positive, got {self.step}")
        if self.hi < self.lo:
            raise ConfigError(f"grid is not monotone: max {self.hi} < min {self.lo}")

    @classmethod
    def parse(cls, text: str) -> "Grid":
        parts = str(text).split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid must be min:max:step, got {text!r}")
        try:
            lo, hi, step = (float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"grid must be min:max:step, got {text!r}")
        return cls(lo, hi, step)

    @classmethod
    def single(cls, x: float) -> "Grid":
        return cls(float(x), float(x), 1.0)

    def points(self) -> np.ndarray:
        count = int(math.floor((self.hi - self.lo) / self.step + 0.5)) + 1
        # rounding keeps nominal points such as 0.0 exact
        return np.round(self.lo + self.step * np.arange(count), 12)

    def __str__(self) -> str:
        return f"{self.lo:g}:{self.hi:g}:{self.step:g}"


_COMPLEX = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_COMPLEX_ROWS = {"type": "array", "items": {"type": "array", "items": _COMPLEX}}

TRIPLE_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "A": _COMPLEX_ROWS,
        "S0": _COMPLEX_ROWS,
        "Pi0": _COMPLEX_ROWS,
    },
    "required": ["n", "A", "S0", "Pi0"],
}

_EXAMPLE_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {"example": {"enum": [1, 2, 3, 4]}},
    "required": ["example"],
}

RUN_CONFIG_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "triple": {"oneOf": [TRIPLE_SCHEMA, _EXAMPLE_SCHEMA]},
        "seed": {"type": "string"},
        "grids": {
            "type": "object",
            "properties": {"x": {"type": "string"}, "y": {"type": "string"}},
            "additionalProperties": False,
        },
        "h": {"oneOf": [{"type": "string"}, {"type": "array"}]},
        "method": {"enum": ["auto", "sylvester", "vanloan", "quadrature"]},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "physical": {
            "type": "object",
            "properties": {"hbar_vf": {"type": "number"}, "energy": {"type": "number"}},
            "required": ["hbar_vf", "energy"],
            "additionalProperties": False,
        },
        "workers": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}


@dataclass
class RunConfig:
    triple_doc: Optional[Dict[str, Any]] = None
    example: Optional[int] = None
    example_params: Dict[str, Any] = field(default_factory=dict)
    seed: str = "zero"
    x_grid: Optional[Grid] = None
    y_grid: Optional[Grid] = None
    h: Optional[Union[str, list]] = None
    method: str = "auto"
    tolerances: Tolerances = DEFAULT_TOLERANCES
    hbar_vf: Optional[float] = None
    energy: Optional[float] = None
    workers: Optional[int] = None

    def __post_init__(self):
        if (self.hbar_vf is None) != (self.energy is None):
            raise ConfigError("physical constants need both hbar_vf and energy")
        if self.hbar_vf is not None and not math.isfinite(self.hbar_vf):
            raise ConfigError("hbar_vf must be finite")

    @property
    def has_physical(self) -> bool:
        return self.hbar_vf is not None

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> "RunConfig":
        try:
            jsonschema.validate(instance=dict(doc), schema=RUN_CONFIG_SCHEMA)
        except jsonschema.ValidationError as e:
            path = "/".join(str(p) for p in e.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {path}: {e.message}")

        kwargs: Dict[str, Any] = {}
        triple = doc.get("triple")
        if triple is not None:
            if "example" in triple:
                kwargs["example"] = int(triple["example"])
                kwargs["example_params"] = {k: v for k, v in triple.items() if k != "example"}
            else:
                kwargs["triple_doc"] = dict(triple)
        if "seed" in doc:
            kwargs["seed"] = doc["seed"]
        grids = doc.get("grids") or {}
        if "x" in grids:
            kwargs["x_grid"] = Grid.parse(grids["x"])
        if "y" in grids:
            kwargs["y_grid"] = Grid.parse(grids["y"])
        if "h" in doc:
            kwargs["h"] = doc["h"]
        if "method" in doc:
            kwargs["method"] = doc["method"]
        kwargs["tolerances"] = DEFAULT_TOLERANCES.with_overrides(doc.get("tolerances"))
        physical = doc.get("physical")
        if physical:
            kwargs["hbar_vf"] = float(physical["hbar_vf"])
            kwargs["energy"] = float(physical["energy"])
        if "workers" in doc:
            kwargs["workers"] = int(doc["workers"])
        return cls(**kwargs)


def load_run_config(path: Union[str, Path]) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e}")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"config {p} is not valid YAML/JSON: {e}")
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config {p} must be a mapping at top level")
    return RunConfig.from_document(doc)
