"""Run configuration: a TOML document with fixed blocks, validated strictly.

Every key has a default; unknown blocks or keys are errors.  The schema:

    [system]     n_qubits, J, eta, b, field_scale
    [baths]      g | coupling_rate (scalar or [L, R]), T, omega_c, cold
    [protocol]   kind, B0, radius, center, semi, tau, nodes, rounding, points, second_order
    [point]      X
    [sweep]      field, bx, bz, resolution, J, b, B0, single_qubit_reference
    [numerics]   fd_step, nested_step, richardson, quadrature_rtol, degeneracy_rtol
    [cycle]      dT
    [output]     format, path, precision

``coupling_rate`` is the rate prefactor of a Pauli-normalised coupling
(jump rate = rate * gamma(w) * |<sigma>|^2); it maps to g = 2 sqrt(rate) for
the spin-1/2 operators used by the engine.  Give either it or ``g``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..lattice import SystemConfig, chain_config
from ..numerics import Numerics
from ..protocols import Circle, Ellipse, Line, PiecewisePath, Protocol, quadrant_sector

PRESETS = ("fig1", "fig3a", "fig3b", "fig4", "fig5", "fig6", "fig7")
PROTOCOL_KINDS = ("ellipse", "circle", "sector", "polygon")


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration (CLI exit code 2)."""


DEFAULTS = {
    "system": {"n_qubits": 2, "J": 0.0, "eta": 1.0, "b": 1.0, "field_scale": 2.0},
    "baths": {"g": None, "coupling_rate": None, "T": 1.0, "omega_c": 120.0, "cold": "L"},
    "protocol": {
        "kind": "circle", "B0": 1.0, "radius": None, "center": None, "semi": None,
        "tau": 1.0, "nodes": 2048, "rounding": 0.0, "points": None, "second_order": None,
    },
    "point": {"X": [1.0, 0.5]},
    "sweep": {
        "field": "max_eig_Lambda", "bx": [0.0, 4.0], "bz": [0.0, 4.0], "resolution": [41, 41],
        "J": None, "b": None, "B0": None, "single_qubit_reference": False,
    },
    "numerics": {
        "fd_step": 1e-5, "nested_step": 1e-3, "richardson": False,
        "quadrature_rtol": 1e-7, "degeneracy_rtol": 1e-9,
    },
    "cycle": {"dT": None},
    "output": {"format": "csv", "path": None, "precision": 12},
}


def _merge(doc: dict, source: str) -> dict:
    out = copy.deepcopy(DEFAULTS)
    for block, body in doc.items():
        if block not in DEFAULTS:
            raise ConfigError(f"{source}: unknown block [{block}]; allowed: {sorted(DEFAULTS)}")
        if not isinstance(body, dict):
            raise ConfigError(f"{source}: [{block}] must be a table")
        for key, value in body.items():
            if key not in DEFAULTS[block]:
                raise ConfigError(
                    f"{source}: unknown key {block}.{key}; allowed: {sorted(DEFAULTS[block])}")
            out[block][key] = value
    return out


def _number(block, key, value, positive=False, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{block}.{key} must be a finite number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{block}.{key} must be positive, got {value!r}")
    return float(value)


def _pair(block, key, value, positive=False):
    if isinstance(value, list):
        if len(value) != 2:
            raise ConfigError(f"{block}.{key} must be a number or an [L, R] pair")
        return tuple(_number(block, key, v, positive) for v in value)
    v = _number(block, key, value, positive)
    return (v, v)


def _numbers(block, key, value, positive=False):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{block}.{key} must be a non-empty list of numbers")
    return [_number(block, key, v, positive) for v in value]


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``data`` is the fully defaulted document."""

    data: dict
    source: str = "<defaults>"

    @classmethod
    def from_dict(cls, doc: dict, source: str = "<dict>") -> "RunConfig":
        cfg = cls(_merge(doc, source), source)
        cfg.validate()
        return cfg

    @classmethod
    def from_toml(cls, text: str, source: str = "<string>") -> "RunConfig":
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{source}: {exc}") from None
        return cls.from_dict(doc, source)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.from_toml(text, str(path))

    @classmethod
    def preset(cls, name: str) -> "RunConfig":
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
        text = resources.files("slowqubits.presets").joinpath(f"{name}.toml").read_text()
        return cls.from_toml(text, f"preset:{name}")

    def updated(self, block: str, **values) -> "RunConfig":
        doc = copy.deepcopy(self.data)
        doc[block].update(values)
        return RunConfig.from_dict(doc, self.source)

    # -- validation ---------------------------------------------------------------

    def validate(self):
        d = self.data
        s = d["system"]
        if isinstance(s["n_qubits"], bool) or not isinstance(s["n_qubits"], int) or s["n_qubits"] < 1:
            raise ConfigError(f"system.n_qubits must be a positive integer, got {s['n_qubits']!r}")
        for key in ("J", "eta", "b"):
            _number("system", key, s[key])
        _number("system", "field_scale", s["field_scale"], positive=True)
        b = d["baths"]
        if (b["g"] is None) == (b["coupling_rate"] is None):
            raise ConfigError("baths: give exactly one of g or coupling_rate")
        key = "g" if b["g"] is not None else "coupling_rate"
        _pair("baths", key, b[key], positive=True)
        _pair("baths", "T", b["T"], positive=True)
        _pair("baths", "omega_c", b["omega_c"], positive=True)
        if b["cold"] not in ("L", "R"):
            raise ConfigError(f"baths.cold must be 'L' or 'R', got {b['cold']!r}")
        p = d["protocol"]
        if p["kind"] not in PROTOCOL_KINDS:
            raise ConfigError(f"protocol.kind must be one of {PROTOCOL_KINDS}, got {p['kind']!r}")
        for key in ("B0", "tau"):
            _number("protocol", key, p[key], positive=True)
        _number("protocol", "radius", p["radius"], positive=True, allow_none=True)
        _number("protocol", "rounding", p["rounding"])
        if isinstance(p["nodes"], bool) or not isinstance(p["nodes"], int) or p["nodes"] < 8:
            raise ConfigError(f"protocol.nodes must be an integer >= 8, got {p['nodes']!r}")
        for key in ("center", "semi"):
            if p[key] is not None and len(_numbers("protocol", key, p[key])) != 2:
                raise ConfigError(f"protocol.{key} must have two entries")
        if p["kind"] == "polygon":
            pts = p["points"]
            if not isinstance(pts, list) or len(pts) < 3:
                raise ConfigError("protocol.points must list at least 3 vertices for a polygon")
            for v in pts:
                if not isinstance(v, list) or len(_numbers("protocol", "points", v)) != 2:
                    raise ConfigError("protocol.points entries must be [B_x, B_z] pairs")
        if p["second_order"] is not None and not isinstance(p["second_order"], bool):
            raise ConfigError("protocol.second_order must be true or false")
        if not isinstance(d["point"]["X"], list):
            raise ConfigError("point.X must be a list")
        _numbers("point", "X", d["point"]["X"])
        w = d["sweep"]
        for key in ("bx", "bz"):
            lo, hi = _numbers("sweep", key, w[key])[:2] if len(w[key]) == 2 else (None, None)
            if lo is None or not hi > lo:
                raise ConfigError(f"sweep.{key} must be an increasing [min, max] range, got {w[key]!r}")
        res = w["resolution"]
        if (not isinstance(res, list) or len(res) != 2
                or any(isinstance(v, bool) or not isinstance(v, int) or v < 1 for v in res)):
            raise ConfigError(f"sweep.resolution must be [nx, nz] positive integers, got {res!r}")
        for key in ("J", "b"):
            if w[key] is not None:
                _numbers("sweep", key, w[key])
        if w["B0"] is not None:
            _numbers("sweep", "B0", w["B0"], positive=True)
        if not isinstance(w["single_qubit_reference"], bool):
            raise ConfigError("sweep.single_qubit_reference must be true or false")
        n = d["numerics"]
        for key in ("fd_step", "nested_step", "quadrature_rtol", "degeneracy_rtol"):
            _number("numerics", key, n[key], positive=True)
        if not isinstance(n["richardson"], bool):
            raise ConfigError("numerics.richardson must be true or false")
        _number("cycle", "dT", d["cycle"]["dT"], positive=True, allow_none=True)
        o = d["output"]
        if o["format"] not in ("csv", "json"):
            raise ConfigError(f"output.format must be csv or json, got {o['format']!r}")
        if isinstance(o["precision"], bool) or not isinstance(o["precision"], int) or not 1 <= o["precision"] <= 17:
            raise ConfigError(f"output.precision must be an integer in [1, 17], got {o['precision']!r}")

    # -- builders -----------------------------------------------------------------

    @property
    def digest(self) -> str:
        """SHA-256 of the canonical (sorted, defaulted) document."""
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def g_pair(self) -> tuple:
        b = self.data["baths"]
        if b["g"] is not None:
            return _pair("baths", "g", b["g"])
        rate = _pair("baths", "coupling_rate", b["coupling_rate"])
        return tuple(2.0 * math.sqrt(r) for r in rate)

    def system(self, **override) -> SystemConfig:
        s = dict(self.data["system"], **override)
        b = self.data["baths"]
        try:
            return chain_config(
                s["n_qubits"], s["J"], s["eta"], s["b"], g=self.g_pair(),
                T=_pair("baths", "T", b["T"]), omega_c=_pair("baths", "omega_c", b["omega_c"]),
                field_scale=s["field_scale"], degeneracy_rtol=self.data["numerics"]["degeneracy_rtol"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def numerics(self) -> Numerics:
        n = self.data["numerics"]
        return Numerics(fd_step=n["fd_step"], richardson=n["richardson"], nested_step=n["nested_step"],
                        quadrature_rtol=n["quadrature_rtol"], nodes=self.data["protocol"]["nodes"])

    def protocol(self, B0: float | None = None) -> Protocol:
        p = self.data["protocol"]
        B0 = p["B0"] if B0 is None else B0
        tau = p["tau"]
        kind = p["kind"]
        try:
            if kind == "ellipse":
                return Ellipse(B0, tuple(p["center"] or (1.0, 0.5)), tuple(p["semi"] or (0.5, 0.25)), tau)
            if kind == "circle":
                center = None if p["center"] is None else tuple(B0 * c for c in p["center"])
                return Circle(B0, p["radius"] or 1.0, tau, center)
            if kind == "sector":
                return quadrant_sector(p["radius"] or 20.0, tau, p["rounding"])
            pts = [tuple(float(c) for c in v) for v in p["points"]]
            segs = [Line(np.array(a), np.array(b)) for a, b in zip(pts, pts[1:] + pts[:1])]
            return PiecewisePath(segs, tuple(f"edge{k}" for k in range(len(segs))), tau)
        except ValueError as exc:
            raise ConfigError(f"protocol: {exc}") from None

    def second_order(self) -> bool:
        """Second-order cycle terms need a C^1 path; sharp sectors and polygons default to off."""
        p = self.data["protocol"]
        if p["second_order"] is not None:
            return p["second_order"]
        if p["kind"] == "polygon":
            return False
        return not (p["kind"] == "sector" and p["rounding"] == 0)

    def grid(self, resolution=None) -> tuple:
        w = self.data["sweep"]
        nx, nz = resolution or w["resolution"]
        return np.linspace(*w["bx"], nx), np.linspace(*w["bz"], nz)

    def point(self):
        return np.array(self.data["point"]["X"], dtype=float)


def load(config_path=None, preset: str | None = None) -> RunConfig:
    """Preset, file, or file layered over a preset (file keys win)."""
    if preset is None and config_path is None:
        return RunConfig.from_dict({}, "<defaults>")
    if preset is not None and config_path is None:
        return RunConfig.preset(preset)
    if preset is None:
        return RunConfig.from_file(config_path)
    base = RunConfig.preset(preset).data
    try:
        text = Path(config_path).read_text()
        doc = tomllib.loads(text)
    except OSError as exc:
        raise ConfigError(f"cannot read config {config_path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{config_path}: {exc}") from None
    _merge(doc, str(config_path))  # key check
    for block, body in doc.items():
        base[block].update(body)
    return RunConfig.from_dict(base, f"preset:{preset}+{config_path}")
