"""Sectioned ``key = value`` experiment configuration."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

from hypslab.hgeom import ConfigurationError, build_grid

__all__ = ["ExperimentConfig", "load_config", "parse_config", "DEFAULTS"]

# every accepted key with its default; the type of the default drives parsing
DEFAULTS: dict = {
    "grid": {"nr": 64, "ntheta": 32, "rmax": 8.0},
    "target": {"kind": "poincare", "coefficients": [1.0]},
    "map": {"kind": "holomorphic", "coefficients": [0.0, 0.5], "margin": 0.02},
    "perturbation": {"epsilon": 0.05, "center_r": 1.0, "center_theta": 0.3, "width": 1.0,
                     "components": [1 + 0.5j]},
    "heat": {"smax": 20.0, "ds0": 0.0, "growth": 1.2},
    "sl": {"T": 1.0, "dt": 0.01, "scheme": "midpoint"},
    "spectral": {"lambda_max": 12.0, "nlambda": 160, "J": 25,
                 "t_samples": [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0], "sigma": 0.0},
    "diagnostics": {"sample_every": 50, "which": ["all"]},
    "output": {"dir": "out", "snapshot_every": 0, "seed": 12345},
}

_CHOICES = {
    ("target", "kind"): ("poincare",),
    ("map", "kind"): ("holomorphic", "antiholomorphic", "constant"),
    ("sl", "scheme"): ("midpoint",),
}


@dataclass
class ExperimentConfig:
    sections: dict = field(default_factory=dict)
    source: str = "<defaults>"

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]

    def get(self, section: str, key: str):
        return self.sections[section][key]

    def grid(self):
        g = self.sections["grid"]
        return build_grid(g["nr"], g["ntheta"], g["rmax"])

    def which(self) -> list:
        return list(self.sections["diagnostics"]["which"])


def _parse_number(text: str, want, key: str):
    try:
        if isinstance(want, bool):
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if isinstance(want, int):
            return int(text)
        if isinstance(want, float):
            return float(text)
        if isinstance(want, complex):
            return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse {text!r} as {type(want).__name__}") from None
    return text


def _parse_value(text: str, default, key: str):
    text = text.strip()
    if isinstance(default, list):
        items = [t for t in text.replace(",", " ").split() if t]
        proto = default[0] if default else ""
        if isinstance(proto, (int, float)) and not isinstance(proto, bool):
            # coefficient lists may hold complex entries
            vals = [_parse_number(t, complex(0), key) for t in items]
            if isinstance(proto, float) and all(v.imag == 0 for v in vals):
                return [v.real for v in vals]
            return vals
        if isinstance(proto, complex):
            return [_parse_number(t, complex(0), key) for t in items]
        return items
    return _parse_number(text, default, key)


def _require(cond: bool, key: str, msg: str) -> None:
    if not cond:
        raise ConfigurationError(f"{key}: {msg}")


def _validate(s: dict) -> None:
    g = s["grid"]
    _require(g["nr"] >= 8, "grid.nr", f"must be >= 8, got {g['nr']}")
    _require(g["ntheta"] >= 8 and g["ntheta"] % 2 == 0, "grid.ntheta",
             f"must be an even integer >= 8, got {g['ntheta']}")
    _require(math.isfinite(g["rmax"]) and g["rmax"] > 0, "grid.rmax", "must be positive")
    for (sec, key), allowed in _CHOICES.items():
        _require(s[sec][key] in allowed, f"{sec}.{key}", f"must be one of {allowed}")
    coef = s["target"]["coefficients"]
    _require(len(coef) == 1 and complex(coef[0]).imag == 0 and complex(coef[0]).real > 0,
             "target.coefficients", "poincare target takes one positive scale")
    m = s["map"]
    _require(1 <= len(m["coefficients"]) <= 9, "map.coefficients", "needs 1 to 9 entries")
    _require(0 < m["margin"] < 0.5, "map.margin", "must lie in (0, 0.5)")
    p = s["perturbation"]
    _require(math.isfinite(p["epsilon"]) and abs(p["epsilon"]) < 0.5, "perturbation.epsilon",
             "must be finite with |epsilon| < 0.5")
    _require(p["center_r"] >= 0, "perturbation.center_r", "must be nonnegative")
    _require(p["width"] > 0, "perturbation.width", "must be positive")
    _require(len(p["components"]) == 1, "perturbation.components",
             "surface targets take one complex component")
    h = s["heat"]
    _require(h["smax"] > 0, "heat.smax", "must be positive")
    _require(h["ds0"] >= 0, "heat.ds0", "must be >= 0 (0 selects the default)")
    _require(1.0 <= h["growth"] <= 2.0, "heat.growth", "must lie in [1, 2]")
    sl = s["sl"]
    _require(sl["T"] >= 0, "sl.T", "must be nonnegative")
    _require(sl["dt"] > 0, "sl.dt", "must be positive")
    _require(abs(round(sl["T"] / sl["dt"]) * sl["dt"] - sl["T"]) <= 1e-9 * max(1.0, sl["T"]),
             "sl.T", "must be a multiple of sl.dt")
    sp = s["spectral"]
    _require(sp["lambda_max"] > 0, "spectral.lambda_max", "must be positive")
    _require(sp["nlambda"] >= 16, "spectral.nlambda", "must be >= 16")
    _require(1 <= sp["J"] <= 200, "spectral.J", "must lie in [1, 200]")
    _require(len(sp["t_samples"]) >= 1 and all(t >= 1 for t in sp["t_samples"]),
             "spectral.t_samples", "needs values >= 1")
    _require(sp["sigma"] in (0.0, 0.25), "spectral.sigma", "must be 0 or 0.25")
    d = s["diagnostics"]
    _require(d["sample_every"] >= 1, "diagnostics.sample_every", "must be >= 1")
    o = s["output"]
    _require(o["snapshot_every"] >= 0, "output.snapshot_every", "must be >= 0")
    _require(o["seed"] >= 0, "output.seed", "must be >= 0")


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   comment_prefixes=("#", ";"), delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    sections = {name: dict(keys) for name, keys in DEFAULTS.items()}
    for name in cp.sections():
        if name not in DEFAULTS:
            raise ConfigurationError(f"{name}: unknown section")
        for key, raw in cp.items(name):
            full = f"{name}.{key}"
            if key not in DEFAULTS[name]:
                raise ConfigurationError(f"{full}: unknown key")
            sections[name][key] = _parse_value(raw, DEFAULTS[name][key], full)
    _validate(sections)
    return ExperimentConfig(sections, source)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"{path}: {exc.strerror}") from None
    return parse_config(text, str(path))
