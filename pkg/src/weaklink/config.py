"""Validation of JSON run configurations.

Every failure raises :class:`ConfigError` carrying the dotted key of the
offending entry, before any computation starts.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cavity import CavityParams
from .circuit import CircuitSpec, JJLink, QPSLink
from .dataops import MeasurementProtocol
from .errors import ConfigError, DomainError
from .fitting import CAVITY_NAMES, CIRCUIT_NAMES
from .spectra import SimpleSpec

FORMATS = ("csv", "svg", "both")
REQUIRED = object()


def _number(v, key, positive=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        raise ConfigError(key, f"expected a finite number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(key, f"expected an integer, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(key, f"must be positive, got {v!r}")
    return int(v) if integer else float(v)


def _fields(data, prefix, schema):
    """Check ``data`` against ``schema`` (name -> (kind, default)) and convert."""
    if not isinstance(data, dict):
        raise ConfigError(prefix, "expected an object")
    for k in data:
        if k not in schema:
            raise ConfigError(f"{prefix}.{k}", "unknown key")
    out = {}
    for name, (kind, default) in schema.items():
        key = f"{prefix}.{name}"
        if name not in data:
            if default is REQUIRED:
                raise ConfigError(key, "missing required key")
            out[name] = default
            continue
        v = data[name]
        if kind == "num":
            out[name] = _number(v, key)
        elif kind == "pos":
            out[name] = _number(v, key, positive=True)
        elif kind == "int":
            out[name] = _number(v, key, integer=True)
        elif kind == "posint":
            out[name] = _number(v, key, positive=True, integer=True)
        elif kind == "bool":
            if not isinstance(v, bool):
                raise ConfigError(key, f"expected true or false, got {v!r}")
            out[name] = v
        elif kind == "str":
            if not isinstance(v, str):
                raise ConfigError(key, f"expected a string, got {v!r}")
            out[name] = v
        elif kind == "numlist":
            if not isinstance(v, list) or not v:
                raise ConfigError(key, "expected a non-empty list of numbers")
            out[name] = [_number(x, f"{key}[{i}]") for i, x in enumerate(v)]
        elif isinstance(kind, tuple):
            if v not in kind:
                raise ConfigError(key, f"expected one of {list(kind)}, got {v!r}")
            out[name] = v
        elif kind == "any":
            out[name] = v
        else:  # pragma: no cover
            raise AssertionError(kind)
    return out


def _build(cls, prefix, **kwargs):
    try:
        return cls(**kwargs)
    except (DomainError, ValueError) as exc:
        msg = str(exc)
        key = next((k for k in kwargs if msg.startswith(k)), None)
        raise ConfigError(f"{prefix}.{key}" if key else prefix, msg) from exc


SWEEP = {
    "start": ("num", REQUIRED),
    "stop": ("num", REQUIRED),
    "step": ("pos", 2e-3),
    "initial_well": ("any", "global-minimum"),
    "direction": (("up", "down", "both"), "up"),
    "branch": ((0, 1, 2), 0),
}
QPS = {"ramp_rate": ("num", 1e4), "factor": ("num", 1.0), "levels": (("both", "upper"), "both")}
CPR = {
    "phi_min": ("num", -2 * np.pi),
    "phi_max": ("num", 2 * np.pi),
    "n_points": ("posint", 801),
    "chi_values": ("numlist", None),
}
SPECTRUM = {
    "e_c": ("pos", REQUIRED),
    "e_l": ("pos", REQUIRED),
    "e_j": ("pos", REQUIRED),
    "chi": ("num", REQUIRED),
    "e_lq": ("pos", REQUIRED),
    "e_q": ("pos", REQUIRED),
    "flux_min": ("num", 0.0),
    "flux_max": ("num", 1.0),
    "n_flux": ("posint", 11),
    "n_levels": ("posint", 8),
    "compare_flux": ("num", 0.0),
    "compare_levels": ("posint", 7),
}
CAVITY = {
    "f_a": ("pos", REQUIRED),
    "f_b": ("pos", REQUIRED),
    "g_a": ("num", REQUIRED),
    "g_b": ("num", 0.0),
    "tie_g_b": ("bool", False),
}
FIT = {
    "free": ("any", REQUIRED),
    "bounds": ("any", REQUIRED),
    "initial": ("any", None),
    "max_iter": ("posint", 400),
}
PROTOCOL = {
    "f_ref": ("pos", REQUIRED),
    "phi_ref": ("num", REQUIRED),
    "delta_phi": ("num", REQUIRED),
    "f_rout": ("pos", REQUIRED),
    "threshold": ("num", None),
}
LIFETIMES = {"bins": ("posint", 10), "debounce": ("posint", 3), "window": ("pos", None)}
CALIBRATION = {"min_step": ("pos", 1e-3)}
OUTPUT = {"dir": ("str", None), "format": (FORMATS, None)}
TOP = ("name", "description", "circuit", "cavity", "sweep", "qps", "cpr", "spectrum", "fit",
       "protocol", "lifetimes", "calibration", "output")


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Validated configuration document; absent blocks are ``None``."""

    raw: dict
    circuit: CircuitSpec | None = None
    cavity: CavityParams | None = None
    sweep: dict | None = None
    qps: dict | None = None
    cpr: dict | None = None
    spectrum: dict | None = None
    fit: dict | None = None
    protocol: MeasurementProtocol | None = None
    lifetimes: dict | None = None
    calibration: dict | None = None
    output: dict | None = None

    def require(self, *blocks):
        for b in blocks:
            if getattr(self, b) is None:
                raise ConfigError(b, "missing required block")
        return self

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("<root>", "expected a JSON object")
        for k in data:
            if k not in TOP:
                raise ConfigError(k, "unknown key")
        out = {"raw": data}
        if "circuit" in data:
            out["circuit"] = CircuitSpec.from_dict(data["circuit"])
        if "cavity" in data:
            out["cavity"] = _build(CavityParams, "cavity", **_fields(data["cavity"], "cavity", CAVITY))
        if "sweep" in data:
            sw = _fields(data["sweep"], "sweep", SWEEP)
            iw = sw["initial_well"]
            if iw != "global-minimum" and (isinstance(iw, bool) or not isinstance(iw, int)):
                raise ConfigError("sweep.initial_well", "expected an integer or 'global-minimum'")
            if sw["start"] == sw["stop"]:
                raise ConfigError("sweep.stop", "must differ from start")
            out["sweep"] = sw
        if "qps" in data:
            q = _fields(data["qps"], "qps", QPS)
            if q["ramp_rate"] < 0:
                raise ConfigError("qps.ramp_rate", "must be non-negative")
            if q["factor"] < 0:
                raise ConfigError("qps.factor", "must be non-negative")
            out["qps"] = q
        if "cpr" in data:
            out["cpr"] = _fields(data["cpr"], "cpr", CPR)
            for i, chi in enumerate(out["cpr"]["chi_values"] or ()):
                if not 0 <= chi <= 1:
                    raise ConfigError(f"cpr.chi_values[{i}]", "chi must lie in [0, 1]")
        if "spectrum" in data:
            sp = _fields(data["spectrum"], "spectrum", SPECTRUM)
            _build(SimpleSpec, "spectrum", e_c=sp["e_c"], e_l=sp["e_l"],
                   weak_link=_build(JJLink, "spectrum", e0=sp["e_j"], chi=sp["chi"]))
            if sp["flux_max"] < sp["flux_min"]:
                raise ConfigError("spectrum.flux_max", "must not be below flux_min")
            if sp["compare_levels"] >= sp["n_levels"]:
                raise ConfigError("spectrum.compare_levels", "must be below n_levels")
            out["spectrum"] = sp
        if "fit" in data:
            out["fit"] = _fit_block(data["fit"])
        if "protocol" in data:
            out["protocol"] = _build(MeasurementProtocol, "protocol",
                                     **_fields(data["protocol"], "protocol", PROTOCOL))
        if "lifetimes" in data:
            out["lifetimes"] = _fields(data["lifetimes"], "lifetimes", LIFETIMES)
        if "calibration" in data:
            out["calibration"] = _fields(data["calibration"], "calibration", CALIBRATION)
        if "output" in data:
            out["output"] = _fields(data["output"], "output", OUTPUT)
        return cls(**out)


def _fit_block(data):
    f = _fields(data, "fit", FIT)
    free = f["free"]
    if not isinstance(free, list) or not free:
        raise ConfigError("fit.free", "expected a non-empty list of parameter names")
    for i, name in enumerate(free):
        if name not in CIRCUIT_NAMES + CAVITY_NAMES:
            raise ConfigError(f"fit.free[{i}]", f"unknown parameter {name!r}")
    bounds = f["bounds"]
    if not isinstance(bounds, dict):
        raise ConfigError("fit.bounds", "expected an object")
    parsed = {}
    for name in free:
        key = f"fit.bounds.{name}"
        if name not in bounds:
            raise ConfigError(key, "missing bounds for a free parameter")
        b = bounds[name]
        if not isinstance(b, list) or len(b) != 2:
            raise ConfigError(key, "expected [lo, hi]")
        lo, hi = _number(b[0], key), _number(b[1], key)
        if not lo < hi:
            raise ConfigError(key, "lo must be below hi")
        parsed[name] = (lo, hi)
    initial = f["initial"] or {}
    if not isinstance(initial, dict):
        raise ConfigError("fit.initial", "expected an object")
    init = {k: _number(v, f"fit.initial.{k}") for k, v in initial.items()}
    for k in init:
        if k not in free:
            raise ConfigError(f"fit.initial.{k}", "not a free parameter")
    return {"free": free, "bounds": parsed, "initial": init, "max_iter": f["max_iter"]}


def load_config(path):
    """Read and validate a configuration file.

    Raises :class:`ConfigError` for malformed JSON or schema violations and
    ``OSError`` when the file cannot be read.
    """
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return RunConfig.from_dict(data)


def simple_specs(block):
    """Junction and phase-slip variants of the single-loop circuit."""
    jj = SimpleSpec(block["e_c"], block["e_l"], JJLink(block["e_j"], block["chi"]))
    qps = SimpleSpec(block["e_c"], block["e_l"], QPSLink(block["e_q"], block["e_lq"]))
    return jj, qps
