"""
Run configuration: JSON documents with unit-suffixed quantities.

Quantities may be plain numbers (SI: m, s, m/s, rad/s, rad) or strings such
as ``"31.9 um"``, ``"780 nm"``, ``"100 us"``, ``"2 m/s"``. Frequencies are
angular unless the unit is in the Hz family, which is multiplied by 2 pi:
``"5 Mrad/s"`` is 5e6 rad/s while ``"5 MHz"`` is 2 pi * 5e6 rad/s.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .exceptions import ConfigError
from .fields import FieldGeometry

MODES = ("simulate", "scan", "protocol", "classify", "adiabaticity")
PROTOCOLS = ("atom-photon", "atom-atom", "photon-photon")
FORMATS = ("csv", "json", "svg")

_PI2 = 2 * math.pi
UNITS = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "μm": 1e-6, "µm": 1e-6,
               "nm": 1e-9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "μs": 1e-6, "µs": 1e-6, "ns": 1e-9},
    "velocity": {"m/s": 1.0, "mm/s": 1e-3, "um/s": 1e-6, "cm/s": 1e-2},
    "frequency": {"rad/s": 1.0, "krad/s": 1e3, "Mrad/s": 1e6, "Grad/s": 1e9,
                  "Hz": _PI2, "kHz": _PI2 * 1e3, "MHz": _PI2 * 1e6, "GHz": _PI2 * 1e9},
    "angle": {"rad": 1.0, "deg": math.pi / 180, "pi": math.pi},
}

GEOMETRY_FIELDS = {
    "G0": "frequency", "Omega0": "frequency", "W_C": "length", "W_L": "length",
    "wavelength": "length", "v": "velocity", "z0": "length", "d": "length",
    "phi_L": "angle", "tau": "time", "x0": "length",
}
GEOMETRY_REQUIRED = ("W_C", "W_L", "wavelength", "v")

_QUANTITY = {"anyOf": [{"type": "number"}, {"type": "string"}]}
_GEOMETRY_SCHEMA = {
    "type": "object",
    "properties": {
        **{name: _QUANTITY for name in GEOMETRY_FIELDS},
        "Omega0_area": {"type": "number", "minimum": 0},
        "G0_area": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "fstirap run configuration",
    "type": "object",
    "properties": {
        "mode": {"enum": list(MODES)},
        "protocol": {"enum": list(PROTOCOLS)},
        "initial": {"enum": ["g1", "e", "g2"]},
        "pulses": {"enum": ["atom1", "atom2"]},
        "geometry": _GEOMETRY_SCHEMA,
        "geometry2": _GEOMETRY_SCHEMA,
        "integrator": {
            "type": "object",
            "properties": {
                "rel_tol": {"type": "number", "exclusiveMinimum": 0},
                "abs_tol": {"type": "number", "exclusiveMinimum": 0},
                "max_step": {"anyOf": [_QUANTITY, {"type": "null"}]},
            },
            "additionalProperties": False,
        },
        "scan": {
            "type": "object",
            "properties": {
                "z0_range": {"type": "array", "items": _QUANTITY, "minItems": 2, "maxItems": 2},
                "d_range": {"type": "array", "items": _QUANTITY, "minItems": 2, "maxItems": 2},
                "resolution": {"type": "array", "items": {"type": "integer", "minimum": 2},
                               "minItems": 2, "maxItems": 2},
                "target_P": {"type": "number"},
                "tol_P": {"type": "number", "exclusiveMinimum": 0},
                "tol_e": {"type": "number", "exclusiveMinimum": 0},
                "workers": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "classify": {
            "type": "object",
            "properties": {
                "epsilon_rel": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "trailing_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "stability": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "adiabaticity": {
            "type": "object",
            "properties": {"t_int": {"anyOf": [_QUANTITY, {"type": "null"}]}},
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {
                "dir": {"type": "string"},
                "samples": {"type": "integer", "minimum": 2},
                "formats": {"type": "array", "items": {"enum": list(FORMATS)}},
            },
            "additionalProperties": False,
        },
    },
    "required": ["geometry"],
    "additionalProperties": False,
}

_NUMBER_UNIT = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")


def parse_quantity(value, kind: str, where: str = "") -> float:
    """Convert a number or ``"<number> <unit>"`` string to SI (rad/s for frequencies)."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a quantity, got {value!r}")
    if isinstance(value, (int, float)):
        out = float(value)
    else:
        m = _NUMBER_UNIT.match(str(value))
        if not m:
            raise ConfigError(f"{where}: cannot parse quantity {value!r}")
        number, unit = m.groups()
        if unit == "":
            scale = 1.0
        elif unit in UNITS[kind]:
            scale = UNITS[kind][unit]
        else:
            raise ConfigError(
                f"{where}: unit {unit!r} is not a {kind} unit (allowed: {', '.join(UNITS[kind])})")
        out = float(number) * scale
    if not math.isfinite(out):
        raise ConfigError(f"{where}: quantity must be finite")
    return out


def parse_geometry(block: dict, where: str = "geometry", base: FieldGeometry | None = None
                   ) -> FieldGeometry:
    """Build a :class:`FieldGeometry`; ``base`` supplies defaults for missing keys."""
    values = {} if base is None else base.to_dict()
    for name, kind in GEOMETRY_FIELDS.items():
        if name in block:
            values[name] = parse_quantity(block[name], kind, f"{where}.{name}")
    missing = [n for n in GEOMETRY_REQUIRED if n not in values]
    if missing:
        raise ConfigError(f"{where}: missing required field(s): {', '.join(missing)}")
    # pulse-area shortcuts: Omega0 = area * v / W_L, G0 = area * v / W_C
    if "Omega0_area" in block:
        values["Omega0"] = block["Omega0_area"] * values["v"] / values["W_L"]
    if "G0_area" in block:
        values["G0"] = block["G0_area"] * values["v"] / values["W_C"]
    for name in ("G0", "Omega0"):
        if name not in values:
            raise ConfigError(f"{where}: missing required field {name} (or {name}_area)")
    try:
        return FieldGeometry(**values)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass
class RunConfig:
    """Validated configuration in canonical SI form."""

    mode: str
    geometry: FieldGeometry
    geometry2: FieldGeometry | None = None
    protocol: str = "atom-photon"
    initial: str = "g1"
    pulses: str = "atom1"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float | None = None
    z0_range: tuple = (0.0, 60e-6)
    d_range: tuple = (0.0, 60e-6)
    resolution: tuple = (101, 101)
    target_P: float = 0.5
    tol_P: float = 0.01
    tol_e: float = 0.01
    workers: int = 1
    epsilon_rel: float = 1e-2
    trailing_fraction: float = 0.5
    stability: float = 0.1
    t_int: float | None = None
    out_dir: str = "out"
    samples: int = 2000
    formats: list = field(default_factory=lambda: ["csv", "json"])

    def to_document(self) -> dict:
        """Canonical JSON document; feeding it back reproduces this config."""
        doc = {
            "mode": self.mode,
            "protocol": self.protocol,
            "initial": self.initial,
            "pulses": self.pulses,
            "geometry": self.geometry.to_dict(),
            "integrator": {"rel_tol": self.rel_tol, "abs_tol": self.abs_tol,
                           "max_step": self.max_step},
            "scan": {"z0_range": list(self.z0_range), "d_range": list(self.d_range),
                     "resolution": list(self.resolution), "target_P": self.target_P,
                     "tol_P": self.tol_P, "tol_e": self.tol_e, "workers": self.workers},
            "classify": {"epsilon_rel": self.epsilon_rel,
                         "trailing_fraction": self.trailing_fraction,
                         "stability": self.stability},
            "adiabaticity": {"t_int": self.t_int},
            "output": {"dir": self.out_dir, "samples": self.samples,
                       "formats": list(self.formats)},
        }
        if self.geometry2 is not None:
            doc["geometry2"] = self.geometry2.to_dict()
        return doc


def _schema_error(err: jsonschema.ValidationError) -> ConfigError:
    path = ".".join(str(p) for p in err.absolute_path) or "<root>"
    return ConfigError(f"{path}: {err.message}")


def build_config(doc: dict, mode: str | None = None, protocol: str | None = None) -> RunConfig:
    """Validate a parsed document and resolve units.

    ``mode`` must agree with ``doc["mode"]`` when both are given; ``protocol``
    overrides ``doc["protocol"]``.
    """
    if isinstance(doc, dict) and "config" in doc and "tool_version" in doc:
        doc = doc["config"]  # a run manifest
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise _schema_error(errors[0])
    if mode is not None and doc.get("mode", mode) != mode:
        raise ConfigError(f"mode: config says {doc['mode']!r} but {mode!r} was requested")
    mode = mode or doc.get("mode")
    if mode is None:
        raise ConfigError("mode: missing (give it in the config or as a subcommand)")

    geom = parse_geometry(doc["geometry"])
    geom2 = None
    if "geometry2" in doc:
        geom2 = parse_geometry(doc["geometry2"], "geometry2", base=geom)

    cfg = RunConfig(mode=mode, geometry=geom, geometry2=geom2)
    cfg.protocol = protocol or doc.get("protocol", cfg.protocol)
    cfg.initial = doc.get("initial", cfg.initial)
    cfg.pulses = doc.get("pulses", cfg.pulses)

    integ = doc.get("integrator", {})
    cfg.rel_tol = integ.get("rel_tol", cfg.rel_tol)
    cfg.abs_tol = integ.get("abs_tol", cfg.abs_tol)
    if integ.get("max_step") is not None:
        cfg.max_step = parse_quantity(integ["max_step"], "time", "integrator.max_step")

    sc = doc.get("scan", {})
    if "z0_range" in sc:
        cfg.z0_range = tuple(parse_quantity(v, "length", f"scan.z0_range[{i}]")
                             for i, v in enumerate(sc["z0_range"]))
    if "d_range" in sc:
        cfg.d_range = tuple(parse_quantity(v, "length", f"scan.d_range[{i}]")
                            for i, v in enumerate(sc["d_range"]))
    cfg.resolution = tuple(sc.get("resolution", cfg.resolution))
    cfg.target_P = sc.get("target_P", cfg.target_P)
    cfg.tol_P = sc.get("tol_P", cfg.tol_P)
    cfg.tol_e = sc.get("tol_e", cfg.tol_e)
    cfg.workers = sc.get("workers", cfg.workers)

    cl = doc.get("classify", {})
    cfg.epsilon_rel = cl.get("epsilon_rel", cfg.epsilon_rel)
    cfg.trailing_fraction = cl.get("trailing_fraction", cfg.trailing_fraction)
    cfg.stability = cl.get("stability", cfg.stability)

    ad = doc.get("adiabaticity", {})
    if ad.get("t_int") is not None:
        cfg.t_int = parse_quantity(ad["t_int"], "time", "adiabaticity.t_int")

    out = doc.get("output", {})
    cfg.out_dir = out.get("dir", cfg.out_dir)
    cfg.samples = out.get("samples", cfg.samples)
    cfg.formats = list(out.get("formats", cfg.formats))

    if cfg.mode == "protocol" and cfg.protocol != "atom-photon" and geom2 is None:
        raise ConfigError(f"geometry2: required for the {cfg.protocol} protocol")
    return cfg


def load_config(path, mode: str | None = None, protocol: str | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    return build_config(doc, mode, protocol)
