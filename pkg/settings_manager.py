# settings_manager.py
# © 2025 Colt McVey
# Experiment settings: defaults, presets, key-value/JSON settings files, CLI overrides and validation.

import json
import math
import os
import logging
from dataclasses import dataclass, asdict

from errors import ConfigError
from topology import GRAPH_KINDS

MODES = ("online", "stochastic_opt")
PROTOCOLS = ("exact", "gossip_fixed", "gossip_auto", "gossip_single", "gossip_opt", "isolated")
LOSSES = ("quadratic", "multinomial_logistic")
DATASETS = ("synthetic", "idx")
LIST_KEYS = ("seeds", "n_values")

DEFAULT_SETTINGS = {
    "name": "run",
    "mode": "online",
    "n": 4,
    "n_values": [],
    "batch_size": 0,
    "batch_per_node": 25,
    "batch_exponent": 0.0,
    "total_samples": 0,
    "rounds": 200,
    "epsilon": 0.0,
    "round_constant": 0.0,
    "gamma": 1,
    "tau": 1.0,
    "topology": "erdos_renyi",
    "edge_prob": 0.5,
    "degree": 3,
    "graph_seed": 0,
    "protocol": "gossip_single",
    "gossip_k": 1,
    "lazy": False,
    "loss": "quadratic",
    "radius": 10.0,
    "dataset": "synthetic",
    "images_path": "",
    "labels_path": "",
    "classes": 10,
    "features": 10,
    "dataset_size": 10000,
    "separation": 4.0,
    "noise": 1.0,
    "data_seed": 0,
    "eval_size": 0,
    "seeds": [0],
    "gap_every": 10,
    "optimum_tol": 1e-8,
    "optimum_max_iter": 100000,
    "retain_diagnostics": False,
}

PRESETS = {
    "fixed_batch": {
        "name": "fixed_batch", "mode": "online", "loss": "multinomial_logistic",
        "classes": 10, "features": 20, "batch_size": 4096, "batch_per_node": 0,
        "n_values": [4, 16], "rounds": 60, "protocol": "gossip_single",
        "seeds": list(range(10)), "gap_every": 0,
    },
    "scaling": {
        "name": "scaling", "mode": "online", "loss": "multinomial_logistic",
        "classes": 10, "features": 20, "batch_size": 0, "batch_per_node": 200,
        "n_values": [4, 8, 16], "rounds": 500, "protocol": "gossip_single",
        "seeds": list(range(10)), "gap_every": 0,
    },
    "accuracy_check": {
        "name": "accuracy_check", "mode": "online", "loss": "quadratic",
        "batch_size": 0, "batch_per_node": 25, "n_values": [4, 16], "rounds": 200,
        "protocol": "gossip_auto", "gamma": 1, "seeds": [0], "retain_diagnostics": False,
    },
    "gap_rate": {
        "name": "gap_rate", "mode": "stochastic_opt", "loss": "quadratic",
        "batch_size": 0, "batch_per_node": 32, "n": 8, "rounds": 10000,
        "protocol": "exact", "seeds": list(range(10)), "gap_every": 100,
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment description; batch_size is the resolved network-wide b."""
    name: str
    mode: str
    n: int
    n_values: tuple
    batch_size: int
    batch_per_node: int
    batch_exponent: float
    total_samples: int
    rounds: int
    epsilon: float
    round_constant: float
    gamma: int
    tau: float
    topology: str
    edge_prob: float
    degree: int
    graph_seed: int
    protocol: str
    gossip_k: int
    lazy: bool
    loss: str
    radius: float
    dataset: str
    images_path: str
    labels_path: str
    classes: int
    features: int
    dataset_size: int
    separation: float
    noise: float
    data_seed: int
    eval_size: int
    seeds: tuple
    gap_every: int
    optimum_tol: float
    optimum_max_iter: int
    retain_diagnostics: bool

    @property
    def online(self) -> bool:
        return self.mode == "online"

    def with_n(self, n: int) -> "ExperimentConfig":
        """The same experiment at network size n, re-resolving b when it scales with n."""
        values = asdict(self)
        values["n"] = n
        if self.batch_per_node or self.batch_exponent:
            values["batch_size"] = 0
        return validate_settings(values)

    def to_settings(self) -> dict:
        values = asdict(self)
        values["n_values"] = list(self.n_values)
        values["seeds"] = list(self.seeds)
        return values


def coerce_value(key: str, raw):
    """Converts raw text (or JSON values) to the type of the key's default."""
    if key not in DEFAULT_SETTINGS:
        raise ConfigError(f"Unknown setting '{key}'", field=key)
    default = DEFAULT_SETTINGS[key]
    try:
        if key in LIST_KEYS:
            if isinstance(raw, (list, tuple)):
                return [int(v) for v in raw]
            text = str(raw).strip()
            return [int(v) for v in text.split(",") if v.strip()] if text else []
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            value = float(raw)
            if not value.is_integer():
                raise ValueError(f"not an integer: {raw!r}")
            return int(value)
        if isinstance(default, float):
            return float(raw)
        return str(raw).strip()
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Cannot parse {raw!r}: {e}", field=key) from e


def parse_key_value(text: str) -> dict:
    """Parses 'key = value' lines; blank lines and '#' comments are skipped."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Line {lineno} is not of the form 'key = value': {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        values[key] = coerce_value(key, raw)
    return values


def format_key_value(settings: dict) -> str:
    lines = []
    for key, value in settings.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _require(condition: bool, field: str, message: str):
    if not condition:
        raise ConfigError(message, field=field)


def validate_settings(values: dict) -> ExperimentConfig:
    """Validates merged settings and resolves the batch size. Raises ConfigError per field."""
    v = dict(values)
    _require(v["mode"] in MODES, "mode", f"must be one of {MODES}")
    _require(v["protocol"] in PROTOCOLS, "protocol", f"must be one of {PROTOCOLS}")
    _require(v["loss"] in LOSSES, "loss", f"must be one of {LOSSES}")
    _require(v["dataset"] in DATASETS, "dataset", f"must be one of {DATASETS}")
    _require(v["topology"] in GRAPH_KINDS, "topology", f"must be one of {GRAPH_KINDS}")
    _require(v["n"] >= 1, "n", "must be at least 1")
    _require(all(x >= 1 for x in v["n_values"]), "n_values", "every entry must be at least 1")
    _require(v["gamma"] >= 1, "gamma", "must be a positive integer")
    _require(v["tau"] >= 0, "tau", "must be nonnegative")
    _require(0 < v["edge_prob"] <= 1, "edge_prob", "must lie in (0, 1]")
    _require(v["radius"] > 0, "radius", "must be positive")
    _require(len(v["seeds"]) >= 1, "seeds", "needs at least one seed")
    _require(v["gap_every"] >= 0, "gap_every", "must be nonnegative")
    _require(v["epsilon"] >= 0, "epsilon", "must be nonnegative")
    _require(v["optimum_tol"] > 0, "optimum_tol", "must be positive")
    if v["protocol"] == "gossip_fixed":
        _require(v["gossip_k"] >= 1, "gossip_k", "gossip_fixed needs k >= 1")
    if v["dataset"] == "idx":
        _require(bool(v["images_path"]) and bool(v["labels_path"]), "images_path",
                 "idx datasets need images_path and labels_path")
    else:
        _require(v["classes"] >= 2, "classes", "must be at least 2")
        _require(v["features"] >= 1, "features", "must be at least 1")
        _require(v["dataset_size"] >= v["classes"], "dataset_size", "must be at least the number of classes")

    n = v["n"]
    rho = v["batch_exponent"]
    rule_b = None
    if rho:
        _require(0 < rho < 0.5, "batch_exponent", "must lie in (0, 1/2)")
        _require(v["total_samples"] > 0, "total_samples", "b = m^rho needs total_samples")
        raw_b = v["total_samples"] ** rho
        rule_b = max(n, n * math.ceil(raw_b / n))
        v["batch_per_node"] = 0
        logging.debug(f"b = m^rho = {raw_b:.2f} rounds up to {rule_b} (multiple of n={n})")
    elif v["batch_per_node"] > 0:
        rule_b = v["batch_per_node"] * n

    # At most one batch rule survives validation so with_n() can re-resolve b.
    if v["batch_size"] > 0:
        _require(v["batch_size"] % n == 0, "batch_size", f"b={v['batch_size']} must be divisible by n={n}")
        if v["batch_size"] != rule_b:
            v["batch_per_node"], v["batch_exponent"] = 0, 0.0
    elif rule_b is not None:
        v["batch_size"] = rule_b
    else:
        raise ConfigError("set batch_size, batch_per_node or batch_exponent", field="batch_size")
    if v["protocol"] == "gossip_auto":
        _require(v["gamma"] < v["batch_size"], "gamma", f"gossip_auto needs gamma < b (b={v['batch_size']})")
    _require(v["rounds"] > 0 or v["total_samples"] > 0 or v["epsilon"] > 0, "rounds",
             "set rounds, total_samples or epsilon")

    v["n_values"] = tuple(v["n_values"])
    v["seeds"] = tuple(v["seeds"])
    return ExperimentConfig(**v)


class SettingsManager:
    """
    Merges settings in order: defaults, preset, settings file, overrides.
    """
    def __init__(self, preset: str | None = None, settings_path: str | None = None,
                 overrides: dict | None = None):
        self.settings = {}
        self.preset = preset
        self.settings_path = settings_path
        self.load_settings(overrides or {})

    def load_settings(self, overrides: dict):
        self.settings = DEFAULT_SETTINGS.copy()
        if self.preset:
            if self.preset not in PRESETS:
                raise ConfigError(f"Unknown preset '{self.preset}'. Expected one of {sorted(PRESETS)}", field="preset")
            self.settings.update(PRESETS[self.preset])
        if self.settings_path:
            self.settings.update(self._read_settings_file(self.settings_path))
        for key, value in overrides.items():
            if value is not None:
                self.settings[key] = coerce_value(key, value)

    def _read_settings_file(self, path: str) -> dict:
        if not os.path.exists(path):
            raise ConfigError(f"Settings file '{path}' not found", field="config")
        try:
            with open(path, 'r') as f:
                if path.endswith(".json"):
                    return {key: coerce_value(key, value) for key, value in json.load(f).items()}
                return parse_key_value(f.read())
        except (json.JSONDecodeError, IOError) as e:
            logging.error(f"Could not load settings file '{path}'. Error: {e}")
            raise ConfigError(f"Could not read settings file '{path}': {e}", field="config") from e

    def get(self, key: str, default=None):
        return self.settings.get(key, default)

    def set(self, key: str, value):
        self.settings[key] = coerce_value(key, value)

    def build_config(self) -> ExperimentConfig:
        return validate_settings(self.settings)

    def to_text(self) -> str:
        return format_key_value(self.settings)
