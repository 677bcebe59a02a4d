"""JSON experiment configuration: schema, validation and the typed view
used by the harness. Unknown keys anywhere are rejected."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema

from .core import MRDError, PopulationDims
from .designs import DESIGN_KINDS, DesignSpec


class ConfigError(MRDError):
    pass


_TYPE_PARAMS = {
    "type": "object",
    "properties": {k: {"type": "number"} for k in ("c", "ib", "is", "t")},
    "required": ["c", "ib", "is", "t"],
    "additionalProperties": False,
}

_COUNTS = {
    "type": "object",
    "patternProperties": {"^-?[0-9]+$": {"type": "integer", "minimum": 0}},
    "additionalProperties": False,
}

_UNIT = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "mrdesign experiment configuration",
    "type": "object",
    "properties": {
        "design": {
            "type": "object",
            "properties": {
                "kind": {"enum": list(DESIGN_KINDS)},
                "dims": {
                    "type": "object",
                    "properties": {
                        "I": {"type": "integer", "minimum": 1},
                        "J": {"type": "integer", "minimum": 1},
                        "I_T": {"type": "integer", "minimum": 0},
                        "J_T": {"type": "integer", "minimum": 0},
                    },
                    "required": ["I", "J", "I_T", "J_T"],
                    "additionalProperties": False,
                },
                "params": {
                    "type": "object",
                    "properties": {
                        "swaps": {"type": "integer", "minimum": 0},
                        "buyer_counts": _COUNTS,
                        "seller_counts": _COUNTS,
                        "threshold": {"type": "integer"},
                        "n_group_B": {"type": "integer", "minimum": 0},
                        "n_treated_S_sellers": {"type": "integer", "minimum": 0},
                        "pi": {"type": "number", "minimum": 0, "maximum": 1},
                        "q": {"type": "number", "minimum": 0, "maximum": 1},
                        "cluster_of": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                        "variant": {"type": "integer", "minimum": 0, "maximum": 7},
                        "treated_fraction": _UNIT,
                        "seller_split": _UNIT,
                        "seller_treated_fraction": _UNIT,
                    },
                    "additionalProperties": False,
                },
            },
            "required": ["kind", "dims"],
            "additionalProperties": False,
        },
        "outcome": {
            "type": "object",
            "required": ["model"],
            "properties": {"model": {"enum": ["gaussian_ali", "bank_file"]}},
            "allOf": [
                {
                    "if": {"properties": {"model": {"const": "gaussian_ali"}}},
                    "then": {
                        "properties": {
                            "model": True,
                            "mu": _TYPE_PARAMS,
                            "sigma": _TYPE_PARAMS,
                            "shared": {"type": "boolean"},
                        },
                        "required": ["mu", "sigma"],
                        "additionalProperties": False,
                    },
                },
                {
                    "if": {"properties": {"model": {"const": "bank_file"}}},
                    "then": {
                        "properties": {"model": True, "path": {"type": "string"}},
                        "required": ["path"],
                        "additionalProperties": False,
                    },
                },
            ],
        },
        "replicas": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "quantiles": {
            "type": "array",
            "items": _UNIT,
            "minItems": 2,
            "maxItems": 2,
        },
        "cross_weight": {"type": "number", "minimum": 0},
        "write_replicas": {"type": "boolean"},
        "figures": {"type": "boolean"},
        "histogram_bins": {"type": "integer", "minimum": 1},
        "ladder": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "array",
                "items": {"type": "integer", "minimum": 2},
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "ladder_fractions": {
            "type": "object",
            "properties": {"buyer": _UNIT, "seller": _UNIT},
            "required": ["buyer", "seller"],
            "additionalProperties": False,
        },
        "oracle": {
            "type": "object",
            "properties": {
                "budget": {"type": "integer", "minimum": 0},
                "banks": {"type": "integer", "minimum": 1},
                "fault_injection": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "assignment_path": {"type": "string"},
        "observed_path": {"type": "string"},
        "types_path": {"type": "string"},
    },
    "additionalProperties": False,
}

DEFAULT_LADDER = ((60, 80), (105, 135), (155, 190), (200, 245), (250, 300))

DEFAULTS: dict[str, Any] = {
    "replicas": 1000,
    "quantiles": [0.025, 0.975],
    "cross_weight": 2.0,
    "write_replicas": False,
    "figures": True,
    "histogram_bins": 50,
    "ladder_fractions": {"buyer": 0.2, "seller": 0.4},
    "oracle": {"budget": 100, "banks": 5, "fault_injection": False},
}


def _path(err: jsonschema.ValidationError) -> str:
    parts = ["config"] + [f"[{p}]" if isinstance(p, int) else str(p) for p in err.absolute_path]
    return ".".join(parts).replace(".[", "[")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration with defaults filled in."""

    raw: dict[str, Any]
    seed: int
    design: DesignSpec | None
    outcome: dict[str, Any] | None
    replicas: int
    quantiles: tuple[float, float]
    cross_weight: float
    write_replicas: bool
    figures: bool
    histogram_bins: int
    ladder: tuple[tuple[int, int], ...]
    ladder_fractions: tuple[float, float]
    oracle: dict[str, Any]
    base_dir: Path

    @property
    def digest(self) -> str:
        """SHA-256 of the canonical JSON of the effective configuration."""
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def resolve(self, value: str) -> Path:
        """A config path, taken relative to the config file's directory."""
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p


def validate(doc: Any) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = []
        for e in errors:
            best = jsonschema.exceptions.best_match([e])
            lines.append(f"{_path(best)}: {best.message}")
        raise ConfigError("; ".join(lines))


def build_config(
    doc: dict[str, Any], seed: int | None = None, base_dir: str | Path = ".", require_seed: bool = True
) -> ExperimentConfig:
    """Validate a config document and apply the CLI seed override."""
    validate(doc)
    raw = copy.deepcopy(doc)
    if seed is not None:
        if seed < 0:
            raise ConfigError("seed: must be >= 0")
        raw["seed"] = seed
    if "seed" not in raw:
        if require_seed:
            raise ConfigError("config.seed: a seed is required (config or --seed)")
        raw["seed"] = 0
    eff = {**copy.deepcopy(DEFAULTS), **raw}
    eff["oracle"] = {**DEFAULTS["oracle"], **raw.get("oracle", {})}
    design = None
    if "design" in raw:
        d = raw["design"]
        try:
            dims = PopulationDims(**d["dims"])
            design = DesignSpec(d["kind"], dims, dict(d.get("params", {})))
        except MRDError as exc:
            raise ConfigError(f"config.design: {exc}") from exc
    ladder = tuple(tuple(x) for x in eff.get("ladder", DEFAULT_LADDER))
    return ExperimentConfig(
        raw=eff,
        seed=int(eff["seed"]),
        design=design,
        outcome=eff.get("outcome"),
        replicas=int(eff["replicas"]),
        quantiles=tuple(eff["quantiles"]),
        cross_weight=float(eff["cross_weight"]),
        write_replicas=bool(eff["write_replicas"]),
        figures=bool(eff["figures"]),
        histogram_bins=int(eff["histogram_bins"]),
        ladder=ladder,
        ladder_fractions=(eff["ladder_fractions"]["buyer"], eff["ladder_fractions"]["seller"]),
        oracle=eff["oracle"],
        base_dir=Path(base_dir),
    )


def load_config(
    path: str | Path, seed: int | None = None, require_seed: bool = True
) -> ExperimentConfig:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from exc
    return build_config(doc, seed, p.parent, require_seed)
