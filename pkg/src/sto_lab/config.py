"""Experiment configuration: JSON schema, validation and model construction."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema

from .coupling import GeneralKernel, Stochastic, Translation
from .density import CircleDensity, trig_polynomial
from .maps import MAX_PERTURBATION_MODE, ExpandingMapSpec
from .sto import StoModel

EXPERIMENTS = ("fixed-point", "differential", "losc", "sweep", "memory", "audit", "ensemble")

_TRIG = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "const": {"type": "number"},
        "cos": {"type": "object", "additionalProperties": False,
                "patternProperties": {"^[1-9][0-9]*$": {"type": "number"}}},
        "sin": {"type": "object", "additionalProperties": False,
                "patternProperties": {"^[1-9][0-9]*$": {"type": "number"}}},
    },
}

_POS_INT = {"type": "integer", "minimum": 1}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}

_PARAMS = {
    "type": {"enum": list(EXPERIMENTS)},
    "solver": {"enum": ["picard", "newton"]},
    "tol": _POS,
    "max_iter": _POS_INT,
    "multistart": {"type": "integer", "minimum": 2},
    "max_W": _POS,
    "f0": _TRIG,
    "direction": _TRIG,
    "fd_steps": {"type": "array", "minItems": 2,
                 "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}},
    "n_max": _POS_INT,
    "ly_n_max": _POS_INT,
    "ensemble": _POS_INT,
    "epsilon": _NONNEG,
    "epsilons": {"type": "array", "minItems": 2, "items": _POS},
    "n_steps": _POS_INT,
    "deltas": {"type": "array", "minItems": 1, "items": _NONNEG},
    "sigmas": {"type": "array", "minItems": 1, "items": _POS},
    "mode": {"enum": ["weak", "strong-regime"]},
    "n": _POS_INT,
    "samples": {"type": "integer", "minimum": 2},
    "particles": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 10}},
    "steps": _POS_INT,
    "seeds": _POS_INT,
    "max_distance": _POS,
    "expect_gamma": _POS,
    "gamma_rel_tol": _POS,
}

_ALLOWED = {
    "fixed-point": ["solver", "tol", "max_iter", "multistart", "max_W", "f0"],
    "differential": ["tol", "direction", "fd_steps", "n_max", "ly_n_max", "ensemble", "epsilons"],
    "losc": ["tol", "epsilon", "ensemble", "n_steps", "deltas", "expect_gamma", "gamma_rel_tol",
             "n_max"],
    "sweep": ["mode", "deltas", "sigmas", "n", "tol", "epsilon", "ensemble"],
    "memory": ["tol", "epsilon", "n_steps", "ensemble", "samples", "expect_gamma",
               "gamma_rel_tol"],
    "audit": ["samples", "deltas", "tol"],
    "ensemble": ["particles", "steps", "seeds", "max_distance"],
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["id", "model", "experiment"],
    "properties": {
        "id": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "expect_exit": {"enum": [0, 1]},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["max_mode", "map", "coupling"],
            "properties": {
                "max_mode": {"type": "integer", "minimum": 1, "maximum": 256},
                "map": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["degree"],
                    "properties": {
                        "degree": {"type": "integer", "minimum": 2},
                        "epsilon": _NONNEG,
                        "perturbation": _TRIG,
                    },
                },
                "coupling": {
                    "type": "object",
                    "required": ["variant", "delta"],
                    "properties": {
                        "variant": {"enum": ["translation", "general", "stochastic"]},
                        "delta": _NONNEG,
                    },
                    "allOf": [
                        {"if": {"properties": {"variant": {"const": "translation"}}},
                         "then": {"required": ["H"],
                                  "properties": {"H": _TRIG},
                                  "propertyNames": {"enum": ["variant", "delta", "H"]}}},
                        {"if": {"properties": {"variant": {"const": "stochastic"}}},
                         "then": {"required": ["sigma"],
                                  "properties": {"sigma": _POS},
                                  "propertyNames": {"enum": ["variant", "delta", "sigma"]}}},
                        {"if": {"properties": {"variant": {"const": "general"}}},
                         "then": {"required": ["terms"],
                                  "properties": {"terms": {
                                      "type": "array", "minItems": 1,
                                      "items": {"type": "object", "additionalProperties": False,
                                                "required": ["a", "b"],
                                                "properties": {"a": {"type": "integer"},
                                                               "b": {"type": "integer"},
                                                               "re": {"type": "number"},
                                                               "im": {"type": "number"}}}}},
                                  "propertyNames": {"enum": ["variant", "delta", "terms"]}}},
                    ],
                },
            },
        },
        "experiment": {
            "type": "object",
            "required": ["type"],
            "properties": _PARAMS,
            "allOf": [
                {"if": {"properties": {"type": {"const": name}}},
                 "then": {"propertyNames": {"enum": ["type"] + keys}}}
                for name, keys in _ALLOWED.items()
            ],
        },
    },
}


class ConfigError(ValueError):
    """Schema or usage problem; maps to exit status 2."""


def _line_of(text: str, key) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def load_config(path) -> dict:
    """Read and validate a config file, raising :class:`ConfigError` with a location."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            where = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}"
                                  for p in err.absolute_path)
            key = next((p for p in reversed(err.absolute_path) if isinstance(p, str)), None)
            if "propertyNames" in err.schema_path:
                key = err.instance
                where += f".{key}"
            line = _line_of(text, key) if key is not None else None
            loc = f"{path}:{line}" if line else str(path)
            lines.append(f"{loc}: {where}: {err.message}")
        raise ConfigError("\n".join(lines))
    return data


def _trig(spec: dict | None, max_mode: int) -> CircleDensity:
    spec = spec or {}
    cos = {int(k): v for k, v in spec.get("cos", {}).items()}
    sin = {int(k): v for k, v in spec.get("sin", {}).items()}
    top = max([1, *cos, *sin])
    return trig_polynomial(max(top, max_mode), spec.get("const", 0.0), cos, sin)


def build_model(cfg: dict) -> StoModel:
    """Construct the model described by the ``model`` section of a validated config."""
    mdl = cfg["model"]
    N = mdl["max_mode"]
    mp = mdl["map"]
    pert = mp.get("perturbation")
    if pert is not None:
        top = max([int(k) for part in ("cos", "sin") for k in pert.get(part, {})] or [1])
        if top > MAX_PERTURBATION_MODE:
            raise ConfigError("map perturbation modes must not exceed 8")
        p = _trig(pert, 1).resized(max(top, 1))
    else:
        p = CircleDensity.zeros(1)
    T = ExpandingMapSpec(mp["degree"], p, float(mp.get("epsilon", 0.0)))
    c = mdl["coupling"]
    delta = float(c["delta"])
    if c["variant"] == "translation":
        coupling = Translation(_trig(c["H"], 1), delta)
    elif c["variant"] == "stochastic":
        coupling = Stochastic(float(c["sigma"]), delta)
    else:
        K = max(max(abs(t["a"]), abs(t["b"])) for t in c["terms"])
        terms = {}
        for t in c["terms"]:
            key = (t["a"], t["b"])
            terms[key] = terms.get(key, 0) + complex(t.get("re", 0.0), t.get("im", 0.0))
        coupling = GeneralKernel.from_terms(max(K, 1), terms, delta)
    return StoModel(T, coupling, N)


def trig_from_config(spec: dict, max_mode: int) -> CircleDensity:
    return _trig(spec, max_mode).resized(max_mode)


def shipped_configs() -> dict:
    """Name to path of every config bundled with the package."""
    root = resources.files("sto_lab") / "configs"
    return {p.name: Path(str(p)) for p in sorted(root.iterdir(), key=lambda q: q.name)
            if p.name.endswith(".json")}
