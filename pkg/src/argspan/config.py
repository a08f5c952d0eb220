"""Run configuration: an INI file with sections, overridable from the CLI.

Every field has a typed default; values read from the file or from
``--set section.key=value`` flags are coerced to the default's type, so
a typo fails loudly instead of training with a string learning rate.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import dataclass, field, fields, asdict

from .model import ModelConfig


class ConfigError(ValueError):
    pass


@dataclass
class PathsConfig:
    train: str = ""
    dev: str = ""
    test: str = ""
    templates: str = ""
    vocab: str = ""        # optional prebuilt vocabulary
    out_dir: str = "runs/run"


@dataclass
class TrainingConfig:
    batch_size: int = 8
    steps: int = 2000
    learning_rates: tuple[float, ...] = (1e-4, 3e-4)
    seeds: tuple[int, ...] = (13,)
    warmup_frac: float = 0.1
    grad_clip: float = 5.0
    weight_decay: float = 0.01
    eval_every: int = 200
    early_stop_f1: float = 0.0   # 0 disables early stopping


@dataclass
class DataConfig:
    ratio: float = 1.0
    shuffle_gold: bool = False
    min_count: int = 1
    max_context_len: int = 128


@dataclass
class InferenceConfig:
    max_span_len: int = 10
    sequential: bool = False


@dataclass
class RunConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    data: DataConfig = field(default_factory=DataConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    prompt_variant: str = "manual"
    loss_mode: str = "bipartite"

    def validate(self) -> None:
        self.model.validate()
        t = self.training
        if t.batch_size < 1 or t.steps < 0 or t.eval_every < 1:
            raise ConfigError("batch_size >= 1, steps >= 0 and eval_every >= 1 required")
        if not t.learning_rates or any(lr <= 0 for lr in t.learning_rates):
            raise ConfigError("learning_rates must be positive")
        if not t.seeds:
            raise ConfigError("at least one seed required")
        if not 0.0 <= t.warmup_frac < 1.0:
            raise ConfigError("warmup_frac must be in [0, 1)")
        if t.grad_clip < 0 or t.weight_decay < 0:
            raise ConfigError("grad_clip and weight_decay must be >= 0")
        if not 0.0 < self.data.ratio <= 1.0:
            raise ConfigError("data ratio must be in (0, 1]")
        if self.data.min_count < 1:
            raise ConfigError("min_count must be >= 1")
        if self.data.max_context_len > self.model.max_positions:
            raise ConfigError(
                f"max_context_len ({self.data.max_context_len}) exceeds model max_positions "
                f"({self.model.max_positions})"
            )
        if self.inference.max_span_len < 1:
            raise ConfigError("max_span_len must be >= 1")
        if self.prompt_variant not in ("manual", "concat", "soft"):
            raise ConfigError(f"unknown prompt_variant {self.prompt_variant!r}")
        if self.loss_mode not in ("bipartite", "fixed_order"):
            raise ConfigError(f"unknown loss_mode {self.loss_mode!r}")

    def require_files(self, *which: str) -> None:
        """Check that the named path fields exist on disk."""
        for name in which:
            path = getattr(self.paths, name)
            if not path:
                raise ConfigError(f"paths.{name} is required but not set")
            if not os.path.exists(path):
                raise ConfigError(f"paths.{name} = {path!r} does not exist")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["training"]["learning_rates"] = list(self.training.learning_rates)
        d["training"]["seeds"] = list(self.training.seeds)
        return d

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


_SECTIONS = {
    "paths": ("paths", PathsConfig),
    "model": ("model", ModelConfig),
    "training": ("training", TrainingConfig),
    "data": ("data", DataConfig),
    "inference": ("inference", InferenceConfig),
}
_RUN_KEYS = ("prompt_variant", "loss_mode")


def _coerce(raw: str, default) -> object:
    raw = raw.strip()
    if isinstance(default, bool):
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        parts = [p for p in (x.strip() for x in raw.split(",")) if p]
        if not parts:
            raise ConfigError("expected a comma-separated list")
        elem = default[0] if default else 0.0
        return tuple(int(p) if isinstance(elem, int) else float(p) for p in parts)
    return raw


def _apply(cfg: RunConfig, section: str, key: str, raw: str) -> None:
    if section == "run":
        if key not in _RUN_KEYS:
            raise ConfigError(f"unknown key run.{key}")
        setattr(cfg, key, raw.strip())
        return
    if section not in _SECTIONS:
        raise ConfigError(f"unknown config section [{section}]")
    attr, klass = _SECTIONS[section]
    target = getattr(cfg, attr)
    names = {f.name for f in fields(klass)}
    if key not in names:
        raise ConfigError(f"unknown key {section}.{key}")
    setattr(target, key, _coerce(raw, getattr(klass(), key)))


def load_config(path: str | None = None, overrides: list[str] = ()) -> RunConfig:
    """Build a RunConfig from an optional INI file plus ``section.key=value`` overrides."""
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file {path!r} not found")
        for section in parser.sections():
            for key, raw in parser.items(section):
                _apply(cfg, section, key, raw)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        dotted, raw = item.split("=", 1)
        section, key = dotted.split(".", 1)
        _apply(cfg, section.strip(), key.strip(), raw)
    cfg.validate()
    return cfg


def save_config(cfg: RunConfig, path: str) -> None:
    parser = configparser.ConfigParser()
    for section, (attr, _klass) in _SECTIONS.items():
        obj = getattr(cfg, attr)
        parser[section] = {}
        for f in fields(obj):
            value = getattr(obj, f.name)
            if isinstance(value, tuple):
                value = ", ".join(str(v) for v in value)
            parser[section][f.name] = str(value)
    parser["run"] = {k: getattr(cfg, k) for k in _RUN_KEYS}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)
