"""JSON run configuration: schema, loading, and wiring into a runtime."""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from . import explorer as ex
from .specializer import SpecPoint

SCALAR = {"type": ["integer", "number", "boolean"]}

DIST = {
    "oneOf": [
        SCALAR,
        {"type": "object", "required": ["constant"], "additionalProperties": False,
         "properties": {"constant": SCALAR}},
        {"type": "object", "required": ["uniform"], "additionalProperties": False,
         "properties": {"uniform": {"type": "array", "minItems": 1, "items": SCALAR}}},
        {"type": "object", "required": ["zipf"], "additionalProperties": False,
         "properties": {"zipf": {
             "type": "object", "required": ["exponent"], "additionalProperties": False,
             "properties": {
                 "exponent": {"type": "number", "exclusiveMinimum": 0},
                 "n": {"type": "integer", "minimum": 1},
                 "keys": {"type": "array", "minItems": 1, "items": SCALAR},
             }}}},
    ]
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["workload"],
    "properties": {
        "workload": {
            "type": "object",
            "required": ["generator", "phases"],
            "properties": {
                "generator": {"enum": ["mmul", "lpm", "pipeline"]},
                "seed": {"type": "integer"},
                "phases": {
                    "type": "array", "minItems": 1,
                    "items": {
                        "type": "object", "required": ["calls"], "additionalProperties": False,
                        "properties": {
                            "calls": {"type": "integer", "minimum": 1},
                            "params": {"type": "object", "additionalProperties": DIST},
                        },
                    },
                },
                "rules": {"type": "integer", "minimum": 1},
                "addresses": {"type": "integer", "minimum": 1},
                "rule_update_at": {"type": "integer", "minimum": 1},
                "items": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "program": {"type": "string"},
        "points": {
            "type": "array",
            "items": {
                "type": "object", "required": ["function", "var"], "additionalProperties": False,
                "properties": {
                    "function": {"type": "string"},
                    "var": {"type": "string"},
                    "kind": {"enum": ["workload", "config"]},
                    "candidates": {"type": "array", "items": SCALAR},
                    "guard": {"type": "boolean"},
                    "collection": {"type": "boolean"},
                    "driver_coupled": {"type": "boolean"},
                },
            },
        },
        "policy": {
            "type": "object",
            "required": ["name"],
            "properties": {
                "name": {"enum": ["none", "exhaustive", "epsilon_greedy", "hot_map"]},
                "windows_per_config": {"type": "integer", "minimum": 1},
                "epsilon": {"type": "number", "minimum": 0, "maximum": 1},
                "windows_per_pull": {"type": "integer", "minimum": 1},
                "pulls": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "function": {"type": "string"},
                "key": {"type": "string"},
                "k": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "window_calls": {"type": "integer", "minimum": 1},
        "monitor_windows": {"type": "integer", "minimum": 0},
        "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "drop_windows": {"type": "integer", "minimum": 1},
        "restart_on": {"enum": ["drop", "shift"]},
        "unroll_cap": {"type": "integer", "minimum": 1},
        "budget_ops": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer"},
        "cap": {"type": "integer", "minimum": 1},
        "floor": {"type": "number", "minimum": 0, "maximum": 1},
        "top_k": {"type": "integer", "minimum": 1},
        "profile_capacity": {"type": ["integer", "null"], "minimum": 1},
        "backend": {"enum": ["auto", "interp", "native"]},
        "memoize": {"type": "boolean"},
    },
}


class ConfigError(ValueError):
    """A configuration problem; ``key`` is the dotted path of the culprit."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def validate_config(cfg) -> dict:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    err = jsonschema.exceptions.best_match(validator.iter_errors(cfg))
    if err is not None:
        key = _path(err.absolute_path)
        if err.validator == "additionalProperties" and isinstance(err.instance, dict):
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            if extra:
                key = _path(list(err.absolute_path) + [extra[0]])
                raise ConfigError(key, "unknown key")
        if err.validator == "required":
            missing = err.message.split("'")[1] if "'" in err.message else ""
            key = _path(list(err.absolute_path) + ([missing] if missing else []))
            raise ConfigError(key, "required key is missing")
        raise ConfigError(key, err.message)
    return cfg


def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("", f"malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    return validate_config(cfg)


def points_from_config(cfg: dict) -> list[SpecPoint]:
    out = []
    for p in cfg.get("points", []):
        kind = p.get("kind", "workload")
        out.append(SpecPoint(
            p["function"], p["var"], kind,
            candidates=p.get("candidates"),
            guard_enabled=p.get("guard"),
            collection_enabled=p.get("collection", True),
            driver_coupled=p.get("driver_coupled", False),
        ))
    return out


def resolve_backend(name: str) -> str:
    from . import native

    if name == "auto":
        return "native" if native.available() else "interp"
    return name


def options_from_config(cfg: dict, **overrides):
    from .runtime import RuntimeOptions

    fields = ("unroll_cap", "window_calls", "budget_ops", "monitor_windows", "delta",
              "drop_windows", "restart_on", "floor", "cap", "top_k", "profile_capacity", "memoize")
    kw = {f: cfg[f] for f in fields if f in cfg}
    kw["backend"] = resolve_backend(cfg.get("backend", "interp"))
    kw.update(overrides)
    return RuntimeOptions(**kw)


def policy_from_config(cfg: dict):
    """The exploration policy object, or None for "none"/"hot_map"/absent."""
    pol = cfg.get("policy") or {"name": "none"}
    name = pol["name"]
    if name == "exhaustive":
        return ex.ExhaustiveSweep(pol.get("windows_per_config", 1))
    if name == "epsilon_greedy":
        return ex.EpsilonGreedy(pol.get("epsilon", 0.1), pol.get("windows_per_pull", 1),
                                pol.get("seed", cfg.get("seed", 0)), pol.get("pulls"))
    return None


def runtime_from_policy(program, cfg: dict, **overrides):
    """Build a Runtime from the runtime-related keys of a config mapping."""
    from .errors import UnknownPoint
    from .runtime import Runtime

    cfg = dict(cfg)
    if "workload" not in cfg:
        # runtime-only mapping: validate the keys that are present
        jsonschema_cfg = dict(cfg, workload={"generator": "mmul", "phases": [{"calls": 1}]})
        validate_config(jsonschema_cfg)
    else:
        validate_config(cfg)
    points = points_from_config(cfg)
    try:
        return Runtime(program, points, options_from_config(cfg, **overrides))
    except UnknownPoint as e:
        raise ConfigError("points", str(e)) from None
