"""Run configuration: a JSON document validated against a fixed schema.

Example (moment variant)::

    {
      "variant": "moment",
      "problem": {
        "partition": [[0], [1]],
        "means": [0.6, 0.5],
        "dispersions": [{"kernel": {"kind": "quadratic"}, "s": 0.1},
                        {"kernel": {"kind": "quadratic"}, "s": [0.05, 0.1]}]
      },
      "seed": 0,
      "trials": 100
    }

A mean or dispersion may be a number (point) or a ``[lo, hi]`` box.  The
domain variant replaces ``dispersions`` by ``caps`` (one per bundle).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .dispersion import DispersionFunction
from .domain_variant import DomainProblem
from .saddle_core import AmbiguityProblem

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_BOX = {
    "oneOf": [
        _POSITIVE,
        {"type": "array", "items": _POSITIVE, "minItems": 2, "maxItems": 2},
    ]
}
_KERNEL = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"kind": {"const": "quadratic"}},
            "required": ["kind"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "quartic"},
                "a": _POSITIVE,
                "b": {"type": "number", "minimum": 0},
            },
            "required": ["kind", "a", "b"],
            "additionalProperties": False,
        },
    ]
}
_PARTITION = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}},
}

SCHEMA = {
    "type": "object",
    "properties": {
        "variant": {"enum": ["moment", "domain"]},
        "problem": {
            "type": "object",
            "properties": {
                "partition": _PARTITION,
                "means": {"type": "array", "minItems": 1, "items": _BOX},
                "dispersions": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {"kernel": _KERNEL, "s": _BOX},
                        "required": ["s"],
                        "additionalProperties": False,
                    },
                },
                "caps": {"type": "array", "items": _POSITIVE},
            },
            "required": ["partition", "means"],
            "additionalProperties": False,
        },
        "tolerances": {
            "type": "object",
            "properties": {"seller": _POSITIVE, "nature": _POSITIVE, "moment": _POSITIVE},
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0},
        "trials": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
    },
    "required": ["variant", "problem"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Schema or semantic violation; the message names the offending field."""


@dataclass(frozen=True)
class RunConfig:
    variant: str
    problem: AmbiguityProblem | DomainProblem
    seed: int = 0
    trials: int = 100
    tolerances: dict = field(default_factory=dict)
    output_dir: str = "."


def _field_path(err: jsonschema.ValidationError) -> str:
    out = ""
    for part in err.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def _interval(x) -> tuple[float, float]:
    if isinstance(x, list):
        return float(x[0]), float(x[1])
    return float(x), float(x)


def parse_config(data: dict) -> RunConfig:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"{_field_path(e)}: {e.message}")
    prob = data["problem"]
    partition = [tuple(b) for b in prob["partition"]]
    variant = data["variant"]
    try:
        if variant == "domain":
            if "caps" not in prob or "dispersions" in prob:
                raise ConfigError("problem.caps: the domain variant takes caps and no dispersions")
            if any(isinstance(m, list) for m in prob["means"]):
                raise ConfigError("problem.means: the domain variant takes point means")
            problem = DomainProblem(tuple(partition), tuple(prob["means"]), tuple(prob["caps"]))
        else:
            if "dispersions" not in prob or "caps" in prob:
                raise ConfigError("problem.dispersions: the moment variant takes dispersions and no caps")
            kernels = [DispersionFunction.from_dict(d.get("kernel", {"kind": "quadratic"})) for d in prob["dispersions"]]
            problem = AmbiguityProblem(
                n=len(prob["means"]),
                partition=tuple(partition),
                mean_bounds=tuple(_interval(m) for m in prob["means"]),
                kernels=tuple(kernels),
                dispersion_bounds=tuple(_interval(d["s"]) for d in prob["dispersions"]),
            )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"problem.{exc}") from exc
    return RunConfig(
        variant=variant,
        problem=problem,
        seed=int(data.get("seed", 0)),
        trials=int(data.get("trials", 100)),
        tolerances=dict(data.get("tolerances", {})),
        output_dir=str(data.get("output_dir", ".")),
    )


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return parse_config(data)


def dump_json(obj, path: str | Path) -> None:
    """Deterministic JSON: sorted keys, repr floats, trailing newline."""
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
