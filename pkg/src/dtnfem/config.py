"""Run configuration: JSON schema, defaults, environment overrides, hashing.

Any key can be overridden from the environment as
``DTNFEM_<SECTION>__<KEY>=<json value>``, e.g. ``DTNFEM_WAVE__KAPPA=3``.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
from pathlib import Path

import jsonschema

ENV_PREFIX = "DTNFEM_"
MODES = ("solve", "converge_h", "converge_N", "verify_kernels", "infsup", "eta_probe")

_number = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "required": ["wave", "obstacle", "mesh"],
    "additionalProperties": False,
    "properties": {
        "wave": {
            "type": "object",
            "required": ["kappa", "R", "N"],
            "additionalProperties": False,
            "properties": {"kappa": _pos, "R": _pos, "N": {"type": "integer", "minimum": 0}},
        },
        "obstacle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["disk", "star"]},
                "radius": _pos,
                "coeffs": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"cos": {"type": "array", "items": _number, "minItems": 1},
                                   "sin": {"type": "array", "items": _number}},
                    "required": ["cos"],
                },
                "center": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
                "c_lin": _pos,
                "epsilon": {"type": "number", "minimum": 0},
            },
        },
        "incident": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "theta_d": _number,
                "amplitude": {"oneOf": [_number, {"type": "array", "items": _number,
                                                  "minItems": 2, "maxItems": 2}]},
            },
        },
        "mesh": {
            "type": "object",
            "required": ["h_target"],
            "additionalProperties": False,
            "properties": {"h_target": _pos, "refinements": {"type": "integer", "minimum": 0}},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"tol": _pos, "max_iter": {"type": "integer", "minimum": 1}},
        },
        "study": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": list(MODES)},
                "N_ref": {"type": "integer", "minimum": 1},
                "N_list": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "n_samples": {"type": "integer"},
                "dense_cap": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json", "dumps"]}},
                "timing": {"type": "boolean"},
            },
        },
    },
}

DEFAULTS = {
    "obstacle": {"type": "disk", "radius": 0.5, "center": [0.0, 0.0], "c_lin": 1.0, "epsilon": 0.0},
    "incident": {"theta_d": 0.0, "amplitude": 1.0},
    "mesh": {"refinements": 0},
    "solver": {"tol": 1e-10, "max_iter": 100},
    "study": {"mode": "solve", "N_ref": 128, "n_samples": 4, "dense_cap": 3000},
    "output": {"dir": "out", "formats": ["csv", "json", "dumps"], "timing": False},
}


class ConfigError(ValueError):
    """Configuration failed schema or physical validation; ``path`` locates the field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def apply_env_overrides(cfg: dict, environ=None) -> dict:
    environ = os.environ if environ is None else environ
    cfg = copy.deepcopy(cfg)
    for key, raw in sorted(environ.items()):
        if not key.startswith(ENV_PREFIX):
            continue
        path = [p.lower() for p in key[len(ENV_PREFIX):].split("__")]
        # keys are case sensitive in the schema (N, R, N_ref); map back case-insensitively
        node = cfg
        props = SCHEMA["properties"]
        for i, p in enumerate(path):
            match = next((k for k in props if k.lower() == p), p)
            if i == len(path) - 1:
                try:
                    node[match] = json.loads(raw)
                except json.JSONDecodeError:
                    node[match] = raw
            else:
                node = node.setdefault(match, {})
                props = props.get(match, {}).get("properties", {})
    return cfg


def validate(cfg: dict) -> dict:
    """Schema check, defaults and physical constraints; returns the completed config."""
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(exc.message, path) from None
    cfg = _merge(DEFAULTS, cfg)
    wave, obs = cfg["wave"], cfg["obstacle"]
    if wave["kappa"] < 1:
        raise ConfigError("kappa must be at least 1 for the 2D solver", "wave/kappa")
    if obs["type"] == "star" and "coeffs" not in obs:
        raise ConfigError("star-shaped obstacle needs coeffs", "obstacle/coeffs")
    if cfg["study"]["n_samples"] < 1:
        raise ConfigError("n_samples must be at least 1", "study/n_samples")
    n_list = cfg["study"].get("N_list")
    if n_list is not None:
        if any(b <= a for a, b in zip(n_list, n_list[1:])):
            raise ConfigError("N_list must be strictly increasing", "study/N_list")
        if any(n >= cfg["study"]["N_ref"] for n in n_list):
            raise ConfigError("N_list entries must stay below N_ref", "study/N_list")
    from .mesh import GeometryError
    try:
        obstacle_spec(cfg).validate(wave["R"])
    except GeometryError as exc:
        raise ConfigError(str(exc), "obstacle") from None
    return cfg


def obstacle_spec(cfg: dict):
    from .mesh import ObstacleSpec

    obs = cfg["obstacle"]
    center = tuple(float(c) for c in obs.get("center", (0.0, 0.0)))
    if obs.get("type", "disk") == "disk":
        return ObstacleSpec.disk(obs["radius"], center, obs["c_lin"], obs["epsilon"])
    co = obs["coeffs"]
    return ObstacleSpec(center, tuple(co["cos"]), tuple(co.get("sin", ())), obs["c_lin"], obs["epsilon"])


def load_config(path, environ=None) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object")
    return validate(apply_env_overrides(raw, environ))


def config_hash(cfg: dict) -> str:
    """Hash of everything that influences results (output location excluded)."""
    relevant = {k: v for k, v in cfg.items() if k != "output"}
    blob = json.dumps(relevant, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# configurations referred to throughout the tests and demos
LINEAR_DISK = {
    "wave": {"kappa": 2.0, "R": 1.0, "N": 16},
    "obstacle": {"type": "disk", "radius": 0.5, "c_lin": 2.0, "epsilon": 0.0},
    "incident": {"theta_d": 0.0, "amplitude": 1.0},
    "mesh": {"h_target": 0.25, "refinements": 3},
    "study": {"mode": "converge_h"},
}

TRUNCATION_STUDY = _merge(LINEAR_DISK, {
    "mesh": {"h_target": 0.0625, "refinements": 0},
    "study": {"mode": "converge_N", "N_list": [2, 4, 8, 16, 32], "N_ref": 128},
})

KERR_DISK = _merge(LINEAR_DISK, {
    "obstacle": {"epsilon": 1e-3},
    "mesh": {"h_target": 0.0625, "refinements": 0},
    "study": {"mode": "solve"},
})

INFSUP_COARSE = {
    "wave": {"kappa": 2.0, "R": 1.0, "N": 8},
    "obstacle": {"type": "disk", "radius": 0.5, "c_lin": 1.0},
    "mesh": {"h_target": 0.25, "refinements": 0},
    "study": {"mode": "infsup", "N_list": [8, 16, 32], "N_ref": 128},
}

ETA_PROBE = _merge(LINEAR_DISK, {
    "obstacle": {"c_lin": 1.0},
    "mesh": {"h_target": 0.25, "refinements": 2},
    "study": {"mode": "eta_probe", "n_samples": 4},
})
