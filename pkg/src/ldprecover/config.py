"""Experiment configuration files (TOML, or JSON with the same layout).

Example::

    seed = 0
    trials = 10

    [dataset]            # either path = "data.txt" or a Zipf law
    d = 102
    n = 389894
    s = 1.1

    [protocol]
    name = "grr"
    epsilon = 0.5

    [attack]
    kind = "adaptive"    # none | manip | mga | mga_ipa | adaptive
    beta = 0.05
    r = 10

    [recovery]
    eta = 0.2

    [sweep]              # optional; exactly one parameter
    param = "eta"
    values = [0.01, 0.1, 0.2, 0.4]

Unknown keys are errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from .attack import ATTACK_KINDS
from .evaluation import METHODS, DatasetSpec, ExperimentConfig
from .ldp import PROTOCOLS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ConfigError", "load_config", "parse_config", "DEFAULT_CONFIG"]


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


# key -> (accepted types, ExperimentConfig field)
_SCHEMA = {
    "": {"seed": (int, "seed"), "trials": (int, "trials"), "methods": (list, "methods")},
    "dataset": {
        "path": (str, None),
        "domain_size": (int, None),
        "d": (int, None),
        "n": (int, None),
        "s": ((int, float), None),
    },
    "protocol": {"name": (str, "protocol"), "epsilon": ((int, float), "epsilon"), "g": (int, "g")},
    "attack": {
        "kind": (str, "attack"),
        "beta": ((int, float), "beta"),
        "m": (int, "m"),
        "r": (int, "r"),
        "h_fraction": ((int, float), "h_fraction"),
        "concentration": ((int, float), "concentration"),
        "attackers": (int, "attackers"),
    },
    "recovery": {
        "eta": ((int, float), "eta"),
        "paper_faithful_partial": (bool, "paper_faithful_partial"),
        "tolerance": ((int, float), "tolerance"),
    },
    "sweep": {"param": (str, "sweep_param"), "values": (list, "sweep_values")},
}

DEFAULT_CONFIG = """\
# Defaults of the evaluation: epsilon=0.5, beta=0.05, r=10, eta=0.2.
seed = 0
trials = 10

[dataset]
d = 102
n = 389894
s = 1.1

[protocol]
name = "grr"
epsilon = 0.5

[attack]
kind = "adaptive"
beta = 0.05
r = 10

[recovery]
eta = 0.2
"""


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        if path.suffix.lower() == ".json":
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>: expected a table")
    kwargs: dict = {}
    dataset: dict = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            if key not in _SCHEMA or key == "":
                raise ConfigError(f"{key}: unknown section")
            for sub, subval in value.items():
                _assign(f"{key}.{sub}", _SCHEMA[key].get(sub), subval, kwargs, dataset if key == "dataset" else None)
        else:
            _assign(key, _SCHEMA[""].get(key), value, kwargs, None)

    if "path" in dataset and {"d", "n", "s"} & set(dataset):
        raise ConfigError("dataset: give either path or a Zipf law (d, n, s), not both")
    kwargs["dataset"] = DatasetSpec(**dataset)

    _check_choice("protocol.name", kwargs.get("protocol"), PROTOCOLS)
    _check_choice("attack.kind", kwargs.get("attack"), ATTACK_KINDS)
    if "methods" in kwargs:
        for i, m in enumerate(kwargs["methods"]):
            _check_choice(f"methods[{i}]", m, METHODS)
        kwargs["methods"] = tuple(kwargs["methods"])
    if "sweep_values" in kwargs:
        values = kwargs["sweep_values"]
        for i, v in enumerate(values):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"sweep.values[{i}]: expected a number, got {v!r}")
        kwargs["sweep_values"] = tuple(float(v) for v in values)
    if ("sweep_param" in kwargs) != ("sweep_values" in kwargs):
        raise ConfigError("sweep: needs both param and values")
    if "beta" in kwargs and "m" in kwargs:
        raise ConfigError("attack: give either beta or m, not both")
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"<config>: {exc}") from None


def _assign(path: str, entry, value, kwargs: dict, dataset: dict | None) -> None:
    if entry is None:
        raise ConfigError(f"{path}: unknown key")
    types, target = entry
    if isinstance(value, bool) and types is not bool:
        raise ConfigError(f"{path}: expected {_type_name(types)}, got a boolean")
    if not isinstance(value, types):
        raise ConfigError(f"{path}: expected {_type_name(types)}, got {type(value).__name__}")
    if dataset is not None:
        dataset[path.split(".", 1)[1]] = value
    else:
        kwargs[target] = value


def _check_choice(path: str, value, choices) -> None:
    if value is not None and value not in choices:
        raise ConfigError(f"{path}: {value!r} is not one of {sorted(choices)}")


def _type_name(types) -> str:
    if isinstance(types, tuple):
        return "a number"
    return {int: "an integer", str: "a string", list: "a list", bool: "a boolean"}[types]
