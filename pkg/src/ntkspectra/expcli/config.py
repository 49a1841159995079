"""Experiment configuration: a JSON document validated into plain values.

A config names an experiment (``fig1`` .. ``fig12`` or ``custom``) and may
override any of that experiment's defaults.  Seeds are always explicit.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

from ..errors import ConfigError
from ..geometry import density_from_config, target_from_config
from ..kernels import KernelSpec

EXPERIMENT_IDS = tuple("fig%d" % i for i in range(1, 13)) + ("custom",)
REQUIRED = ("id",)
CUSTOM_REQUIRED = ("density", "n", "seed")
KNOWN_KEYS = {
    "id", "density", "kernel", "net", "train", "sweep", "n", "seed", "seeds", "out",
    "target", "paper_scale", "k", "grid_size", "json",
}


@dataclass
class ExperimentConfig:
    """Validated experiment configuration.

    ``params`` holds the experiment defaults merged with the overrides
    supplied by the user.  ``user`` keeps the overrides as given, which is
    what the provenance hash covers.
    """

    id: str
    params: dict
    user: dict = field(default_factory=dict)

    @property
    def seed(self):
        return int(self.params["seed"])

    @property
    def out(self):
        return self.params.get("out", "results")

    def to_dict(self):
        return copy.deepcopy(self.params)

    def config_hash(self):
        """Short SHA-256 of the canonical JSON form of the full parameters.

        The output directory is left out: it says where results go, not
        what they are.
        """
        params = {k: v for k, v in self.params.items() if k != "out"}
        blob = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path):
    """Read a JSON config file into a dict."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError("config file not found: %s" % path) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config file %s is not valid JSON: %s" % (path, exc)) from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def validate(cfg):
    """Check a raw config without running anything.

    Returns
    -------
    list of str
        Problems found; empty when the config is valid.  An empty config
        reports every missing required field.
    """
    problems = []
    if not isinstance(cfg, dict):
        return ["config must be a mapping"]
    for key in REQUIRED:
        if key not in cfg:
            problems.append("missing required field: %s" % key)
    exp = cfg.get("id")
    if exp is not None and exp not in EXPERIMENT_IDS:
        problems.append("unknown experiment id %r (expected one of %s)" % (exp, ", ".join(EXPERIMENT_IDS)))
    if exp == "custom" or exp is None:
        for key in CUSTOM_REQUIRED:
            if key not in cfg:
                problems.append("missing required field: %s" % key)
    unknown = sorted(set(cfg) - KNOWN_KEYS)
    if unknown:
        problems.append("unknown fields: %s" % ", ".join(unknown))
    checks = [
        ("density", density_from_config),
        ("target", target_from_config),
        ("kernel", lambda c: KernelSpec(**c)),
    ]
    for key, build in checks:
        if key in cfg:
            try:
                build(cfg[key])
            except (ConfigError, ValueError, TypeError, KeyError) as exc:
                problems.append("invalid %s: %s" % (key, exc))
    if "n" in cfg:
        n = cfg["n"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            problems.append("n must be a positive integer")
    for key in ("seed",):
        if key in cfg and (not isinstance(cfg[key], int) or isinstance(cfg[key], bool) or cfg[key] < 0):
            problems.append("%s must be a non-negative integer" % key)
    if "seeds" in cfg:
        seeds = cfg["seeds"]
        if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
            problems.append("seeds must be a non-empty list of non-negative integers")
    for key in ("net", "train", "sweep"):
        if key in cfg and not isinstance(cfg[key], dict):
            problems.append("%s must be a mapping" % key)
    return problems


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def build_config(cfg, seed=None, out=None, paper_scale=False):
    """Validate ``cfg`` and merge it over the experiment defaults.

    Command-line values (``seed``, ``out``, ``paper_scale``) take precedence
    over the file.

    Raises
    ------
    ConfigError
        Listing every validation problem.
    """
    from .catalog import defaults_for

    user = copy.deepcopy(cfg) if isinstance(cfg, dict) else cfg
    if isinstance(user, dict):
        if seed is not None:
            user["seed"] = int(seed)
        if out is not None:
            user["out"] = str(out)
        if paper_scale:
            user["paper_scale"] = True
    problems = validate(user)
    if problems:
        raise ConfigError("invalid config:\n  " + "\n  ".join(problems))
    base = defaults_for(user["id"], paper_scale=bool(user.get("paper_scale", False)))
    params = _merge(base, {k: v for k, v in user.items() if k != "out"})
    params.setdefault("seed", 0)
    if "out" in user:
        params["out"] = user["out"]
    return ExperimentConfig(user["id"], params, user)
