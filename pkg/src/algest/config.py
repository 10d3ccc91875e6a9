"""Run-configuration schema and loading.

Configs are JSON objects; unknown keys are rejected at every level.
"""
from __future__ import annotations

import json
from pathlib import Path

import jsonschema

__all__ = ["CONFIG_SCHEMA", "ConfigError", "load_config", "validate_config"]

_number_or_expr = {"oneOf": [{"type": "number"}, {"type": "string", "minLength": 1}]}
_coeff_list = {"type": "array", "items": _number_or_expr, "minItems": 1}

_carrier = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["trig-sum", "sinc", "raised-cosine"]},
        "amplitudes": {"type": "array", "items": {"type": "number"}},
        "freqs": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "phases": {"type": "array", "items": {"type": "number"}},
        "omega": {"type": "number", "exclusiveMinimum": 0},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["amplitude", "frequency", "phase", "ode", "rational", "carrier"]},
                "omega": {"type": "number", "exclusiveMinimum": 0},
                "truth": {"type": "object", "additionalProperties": {"type": "number"}},
                "terms": {
                    "type": "array", "minItems": 1,
                    "items": {"type": "array", "minItems": 3, "maxItems": 3,
                              "prefixItems": [{"type": "integer", "minimum": 0},
                                              {"type": "integer", "minimum": 0}, _number_or_expr]},
                },
                "initial": {"type": "array", "items": _number_or_expr},
                "known": {"type": "object", "additionalProperties": {"type": "number"}},
                "numerator": _coeff_list,
                "denominator": _coeff_list,
                "multiplier": _coeff_list,
                "carrier": _carrier,
            },
        },
        "estimator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "params": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "multiplier_offset": {"type": "integer", "minimum": 0},
                "certify_seed": {"type": "integer", "minimum": 0},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "nbar": {"type": "integer", "minimum": 1},
                "window": {"type": "number", "exclusiveMinimum": 0},
                "quadrature": {"enum": ["simpson", "trapezoid"]},
                "eps_div": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["none", "white", "correlated", "sinusoid-sum"]},
                "amplitude": {"type": "number", "minimum": 0},
                "dist": {"enum": ["gaussian", "rademacher", "uniform"]},
                "rho": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1},
                "components": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
                },
            },
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["sweep", "ser"]},
                # sweep
                "estimator": {"enum": ["amplitude", "frequency", "phase"]},
                "truth": {"type": "object", "additionalProperties": {"type": "number"}},
                "omega": {"type": "number", "exclusiveMinimum": 0},
                "window": {"type": "number", "exclusiveMinimum": 0},
                "noise": {"enum": ["sinusoid", "white", "correlated"]},
                "vary": {"enum": ["Omega", "Nbar", "A"]},
                "values": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2},
                "amplitude": {"type": "number", "minimum": 0},
                "amplitude_rule": {"enum": ["fixed", "sqrt", "linear", "power"]},
                "alpha": {"type": "number"},
                "dist": {"enum": ["gaussian", "rademacher", "uniform"]},
                "rho": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1},
                "trials": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "quadrature": {"enum": ["simpson", "trapezoid"]},
                "workers": {"type": "integer", "minimum": 1},
                "eps_div": {"type": "number", "exclusiveMinimum": 0},
                # ser
                "constellation": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "symbols": {"type": "integer", "minimum": 1},
                "snr_db": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "nbar": {"oneOf": [{"type": "integer", "minimum": 1},
                                   {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1}]},
                "chunk": {"type": "integer", "minimum": 1},
                "noiseless": {"type": "boolean"},
            },
        },
        "input": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"signal": {"type": "string"}},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "prefix": {"type": "string"}},
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}


class ConfigError(ValueError):
    pass


def validate_config(cfg: dict) -> dict:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    return cfg


def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return validate_config(cfg)
