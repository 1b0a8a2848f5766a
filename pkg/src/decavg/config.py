"""JSON run configuration: schema, preset lookup and expansion into runs."""

from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path

import jsonschema

from .engine import ALGORITHMS, ConfigError, RunConfig

_TOPOLOGY = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["cycle", "complete", "mod_ring", "edge_list"]},
        "n": {"type": "integer", "minimum": 2},
        "edges": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}},
        "path": {"type": "string"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_STEP = {"anyOf": [{"const": "auto"}, {"type": "number", "exclusiveMinimum": 0}]}

SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "algorithm": {"enum": list(ALGORITHMS)},
        "algorithms": {"type": "array", "items": {"enum": list(ALGORITHMS)}, "minItems": 1},
        "topology": _TOPOLOGY,
        "topologies": {"type": "array", "items": _TOPOLOGY, "minItems": 1},
        "problem": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["synthetic", "file"]},
                "m": {"type": "integer", "minimum": 1},
                "p": {"type": "integer", "minimum": 1},
                "sparsity": {"type": "integer", "minimum": 0},
                "noise_sd": {"type": "number", "minimum": 0},
                "radius_factor": {"type": "number", "exclusiveMinimum": 0},
                "constrained": {"type": "boolean"},
                "path": {"type": "string"},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "step": {"anyOf": [_STEP, {"type": "object", "additionalProperties": _STEP}]},
        "rounds": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "cadence": {"type": "integer", "minimum": 1},
        "bounds": {"type": "boolean"},
        "oracle_tol": {"type": "number", "exclusiveMinimum": 0},
        "apm_L": {"type": "number", "exclusiveMinimum": 0},
        "classic_decay": {"type": "boolean"},
        "record_wall": {"type": "boolean"},
    },
    "required": ["problem"],
    "oneOf": [{"required": ["algorithm"]}, {"required": ["algorithms"]}],
    "additionalProperties": False,
}


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("decavg.presets").iterdir() if p.name.endswith(".json"))


def load_config(ref: str) -> dict:
    """Read a config file, falling back to a bundled preset of the same stem."""
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    else:
        stem = path.name[:-5] if path.name.endswith(".json") else path.name
        res = resources.files("decavg.presets") / f"{stem}.json"
        if not res.is_file():
            raise FileNotFoundError(f"no config file or preset named {ref!r}")
        text = res.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{ref}: invalid JSON ({exc})") from None
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from None
    if "topology" in cfg and "topologies" in cfg:
        raise ConfigError("give either 'topology' or 'topologies', not both")
    if "topology" not in cfg and "topologies" not in cfg:
        raise ConfigError("config needs a 'topology' or 'topologies' entry")
    prob = cfg["problem"]
    if prob["kind"] == "synthetic":
        missing = [k for k in ("m", "p", "sparsity") if k not in prob]
        if missing:
            raise ConfigError(f"synthetic problem is missing {', '.join(missing)}")
    elif "path" not in prob:
        raise ConfigError("file problem needs a 'path'")


def expand(cfg: dict, seed: int | None = None) -> list[list[RunConfig]]:
    """One group of RunConfigs per topology, one config per algorithm."""
    cfg = copy.deepcopy(cfg)
    algs = cfg.get("algorithms") or [cfg["algorithm"]]
    topos = cfg.get("topologies") or [cfg["topology"]]
    steps = cfg.get("step", "auto")
    groups = []
    for topo in topos:
        group = []
        for alg in algs:
            step = steps.get(alg, "auto") if isinstance(steps, dict) else steps
            group.append(RunConfig(
                algorithm=alg,
                topology=topo,
                problem=cfg["problem"],
                step=step,
                rounds=cfg.get("rounds", 1000),
                seed=cfg.get("seed", 0) if seed is None else seed,
                cadence=cfg.get("cadence"),
                bounds=cfg.get("bounds", False),
                oracle_tol=cfg.get("oracle_tol", 1e-10),
                apm_L=cfg.get("apm_L"),
                classic_decay=cfg.get("classic_decay", True),
                record_wall=cfg.get("record_wall", False),
            ))
        groups.append(group)
    return groups


def topology_label(topo: dict) -> str:
    return f"{topo['kind']}{topo.get('n', '')}"
