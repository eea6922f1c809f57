"""Experiment configuration: defaults, schema validation and hashing."""
from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources

import jsonschema

from ..qaoa import QaoaConfig
from ..qrao import QraoConfig

ARTIFACT_VERSION = "0.1.0"

DEFAULTS = {
    "seed": 0,
    "workers": 1,
    "out": "results",
    "mub": {"n_max": 4, "primes": [2, 3, 5, 7], "tol": 1e-9},
    "width": {
        "n_samples": 100_000,
        "dims": [2, 3, 4],
        "n_unions": 50,
        "dominance_unions": 20,
        "octahedron_ensembles": 200,
        "radial_laws": ["constant", "half_normal", "uniform"],
        "gap_n": [1, 2, 3, 4],
    },
    "qaoa": {
        "families": ["maxcut", "wmaxcut", "mis", "wmis", "knapsack"],
        "sizes": [6, 8],
        "depths": [1, 2],
        "n_seeds": 5,
        "seed_start": 0,
        "edge_prob": 0.5,
        "bootstrap": 10_000,
        "method": {},
    },
    "qrao": {
        "sizes": [6, 8],
        "depths": [1, 2],
        "n_seeds": 5,
        "seed_start": 0,
        "edge_prob": 0.5,
        "exhaustive": False,
        "method": {},
    },
}

# published grids, opt-in through --full
FULL = {
    "qaoa": {"sizes": [8, 10, 12, 14], "depths": [1, 2, 3], "n_seeds": 25},
    "qrao": {"sizes": [6, 8, 10, 12], "depths": [1, 2, 3], "n_seeds": 30},
}

# keys that change scheduling or file placement but never results
_NON_SEMANTIC = ("workers", "out")


class ConfigError(ValueError):
    pass


def schema() -> dict:
    text = resources.files("mublab.harness").joinpath("config_schema.json").read_text()
    return json.loads(text)


def _merge(base, extra):
    out = copy.deepcopy(base)
    for key, val in (extra or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def validate(doc: dict):
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        lines = []
        for e in errors:
            where = "/".join(str(p) for p in e.path) or "<root>"
            lines.append(f"{where}: {e.message}")
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))


def load_config(path=None, full=False, **overrides) -> dict:
    """Defaults, then ``--full`` grids, then the user file, then CLI flags."""
    user = {}
    if path is not None:
        with open(path) as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be an object")
        validate(user)
    cfg = _merge(DEFAULTS, FULL) if full else copy.deepcopy(DEFAULTS)
    cfg = _merge(cfg, user)
    cfg = _merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    validate(cfg)
    # method overrides must also be accepted by the dataclasses
    QaoaConfig.from_dict(cfg["qaoa"]["method"])
    QraoConfig.from_dict(cfg["qrao"]["method"])
    return cfg


def config_hash(cfg: dict, section=None) -> str:
    """Short digest of everything that can change results."""
    doc = {k: v for k, v in cfg.items() if k not in _NON_SEMANTIC}
    if section is not None:
        doc = {"seed": cfg["seed"], section: cfg[section]}
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def task_seed(master: int, *keys) -> int:
    text = "|".join(str(k) for k in (master,) + keys)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=4).digest(), "little")
