"""Experiment configuration: an INI file with one section per concern.

Every key is optional; omitted keys take the defaults below.  Unknown
sections or keys are rejected.  ``dump_config`` writes every key, so the copy
saved next to a run's metrics fully describes it.

    [dataset]   kind, n_source, n_target, shift, noise, classes, seed
    [model]     variant, student, feature_hidden, feature_dim,
                classifier_hidden, disc_hidden, activation
    [loss]      lambda, beta
    [optimizer] lr, momentum, weight_decay, backbone_lr_scale, lr_decay
    [schedule]  delta
    [run]       total_steps, eval_interval, batch_source, batch_target,
                seed, output_dir
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..data import DatasetSpec
from ..losses import LossWeights
from ..networks import Architecture, VARIANTS


LR_DECAYS = ("none", "inv")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 0.01
    momentum: float = 0.95
    weight_decay: float = 0.0005
    backbone_lr_scale: float = 1.0  # multiplier on the feature extractors' rate
    lr_decay: str = "none"          # "none" or "inv": lr / (1 + 10 p)^0.75

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.lr_decay not in LR_DECAYS:
            raise ValueError(f"lr_decay must be one of {LR_DECAYS}, got {self.lr_decay!r}")
        if not self.backbone_lr_scale > 0:
            raise ValueError(f"backbone_lr_scale must be > 0, got {self.backbone_lr_scale}")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    variant: str = "DANN"
    student: bool = True
    architecture: Architecture = field(default_factory=Architecture)
    weights: LossWeights = field(default_factory=LossWeights)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    delta: float = 10.0
    total_steps: int = 3000
    eval_interval: int = 100
    batch_source: int = 36
    batch_target: int = 36
    seed: int = 0
    output_dir: str = "runs/default"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if self.total_steps < 0:
            raise ValueError(f"total_steps must be >= 0, got {self.total_steps}")
        if self.eval_interval < 1:
            raise ValueError(f"eval_interval must be >= 1, got {self.eval_interval}")
        if not 0 < self.batch_source <= self.dataset.n_source:
            raise ValueError(f"batch_source must be in [1, n_source], got {self.batch_source}")
        if not 0 < self.batch_target <= self.dataset.n_target:
            raise ValueError(f"batch_target must be in [1, n_target], got {self.batch_target}")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


# (section, key) -> (owner, attribute, kind)
_KEYS = {
    ("dataset", "kind"): ("dataset", "kind", str),
    ("dataset", "n_source"): ("dataset", "n_source", int),
    ("dataset", "n_target"): ("dataset", "n_target", int),
    ("dataset", "shift"): ("dataset", "shift", float),
    ("dataset", "noise"): ("dataset", "noise", float),
    ("dataset", "classes"): ("dataset", "classes", int),
    ("dataset", "seed"): ("dataset", "seed", "optint"),
    ("model", "variant"): (None, "variant", str),
    ("model", "student"): (None, "student", bool),
    ("model", "feature_hidden"): ("architecture", "feature_hidden", "ints"),
    ("model", "feature_dim"): ("architecture", "feature_dim", int),
    ("model", "classifier_hidden"): ("architecture", "classifier_hidden", "ints"),
    ("model", "disc_hidden"): ("architecture", "disc_hidden", "ints"),
    ("model", "activation"): ("architecture", "activation", str),
    ("loss", "lambda"): ("weights", "lam", float),
    ("loss", "beta"): ("weights", "beta", float),
    ("optimizer", "lr"): ("optimizer", "lr", float),
    ("optimizer", "momentum"): ("optimizer", "momentum", float),
    ("optimizer", "weight_decay"): ("optimizer", "weight_decay", float),
    ("optimizer", "backbone_lr_scale"): ("optimizer", "backbone_lr_scale", float),
    ("optimizer", "lr_decay"): ("optimizer", "lr_decay", str),
    ("schedule", "delta"): (None, "delta", float),
    ("run", "total_steps"): (None, "total_steps", int),
    ("run", "eval_interval"): (None, "eval_interval", int),
    ("run", "batch_source"): (None, "batch_source", int),
    ("run", "batch_target"): (None, "batch_target", int),
    ("run", "seed"): (None, "seed", int),
    ("run", "output_dir"): (None, "output_dir", str),
}

_FORMS = {int: "an integer", float: "a number", str: "a string", bool: "true or false",
          "ints": "a comma-separated list of integers (may be empty)",
          "optint": "an integer or 'auto'"}


def _convert(raw: str, kind):
    raw = raw.strip()
    if kind is bool:
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(raw)
    if kind == "ints":
        return tuple(int(v) for v in raw.split(",") if v.strip())
    if kind == "optint":
        return None if raw.lower() in ("auto", "none", "") else int(raw)
    if kind is float:
        value = float(raw)
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError(raw)
        return value
    return kind(raw)


def _format(value, kind) -> str:
    if kind == "ints":
        return ", ".join(str(v) for v in value)
    if kind == "optint":
        return "auto" if value is None else str(value)
    if kind is bool:
        return "true" if value else "false"
    if kind is float:
        return repr(float(value))
    return str(value)


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    top: dict = {}
    nested: dict[str, dict] = {"dataset": {}, "architecture": {}, "weights": {}, "optimizer": {}}
    sections = {s for s, _ in _KEYS}
    for section in parser.sections():
        if section not in sections:
            raise ConfigError(f"unknown section [{section}]; expected one of {sorted(sections)}")
        for key, raw in parser.items(section):
            spec = _KEYS.get((section, key))
            if spec is None:
                allowed = sorted(k for s, k in _KEYS if s == section)
                raise ConfigError(f"unknown key {section}.{key}; expected one of {allowed}")
            owner, attr, kind = spec
            try:
                value = _convert(raw, kind)
            except ValueError:
                raise ConfigError(f"{section}.{key} = {raw!r}: expected {_FORMS[kind]}") from None
            (top if owner is None else nested[owner])[attr] = value

    def build(cls, kwargs, label):
        try:
            return cls(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"invalid {label}: {exc}") from None

    try:
        return ExperimentConfig(
            dataset=build(DatasetSpec, nested["dataset"], "[dataset]"),
            architecture=build(Architecture, nested["architecture"], "[model]"),
            weights=build(LossWeights, nested["weights"], "[loss]"),
            optimizer=build(OptimizerConfig, nested["optimizer"], "[optimizer]"),
            **top,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid config: {exc}") from None


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _get(cfg: ExperimentConfig, owner, attr):
    return getattr(cfg if owner is None else getattr(cfg, owner), attr)


def dump_config(cfg: ExperimentConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for (section, key), (owner, attr, kind) in _KEYS.items():
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, _format(_get(cfg, owner, attr), kind))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 over every field that can change results (``output_dir`` excluded)."""
    payload = {f"{s}.{k}": _format(_get(cfg, o, a), kind)
               for (s, k), (o, a, kind) in _KEYS.items() if (s, k) != ("run", "output_dir")}
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
