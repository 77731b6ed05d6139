"""Experiment configuration: JSON schema, validation, loading.

The config file is strict JSON: unknown keys are rejected and every
violation is reported with its field path. Seeds are mandatory; without
one the run could not be reproduced.
"""

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

__all__ = [
    "ConfigError",
    "SyntheticData",
    "IdxData",
    "ExperimentConfig",
    "load_config",
    "config_to_dict",
]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticData:
    classes: int = 10
    per_class: int = 100
    test_per_class: int = 50
    dim: int = 20
    separation: float = 3.0
    kind: str = field(default="synthetic", init=False)


@dataclass(frozen=True)
class IdxData:
    train_images: str
    train_labels: str
    test_images: str
    test_labels: str
    num_classes: int = 10
    per_class_limit: Optional[int] = None
    kind: str = field(default="idx", init=False)


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    devices: int
    selected: int
    rounds: int
    dataset: object
    s_dl: int
    s_ul: int
    sigma2_dl: float
    sigma2_ul: float
    power_dl: float
    power_ul: float
    local_steps: int = 1
    batch_size: int = 32
    learning_rate: float = 0.1
    learner: str = "logistic"
    hidden_units: int = 32
    optimizer: str = "sgd"
    aggregation: str = "uniform"
    baseline: bool = False
    workers: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        if self.seed < 0:
            raise ConfigError("seed: must be a nonnegative integer")
        if self.devices < 1:
            raise ConfigError("devices: must be >= 1")
        if not 1 <= self.selected <= self.devices:
            raise ConfigError(
                f"selected: must satisfy 1 <= selected <= devices, got {self.selected}")
        if self.rounds < 1:
            raise ConfigError("rounds: must be >= 1")
        if self.power_dl <= 0 or self.power_ul <= 0:
            raise ConfigError("power_dl/power_ul: must be positive")
        if self.learner not in ("logistic", "mlp"):
            raise ConfigError(f"learner: unknown kind {self.learner!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"optimizer: unknown kind {self.optimizer!r}")
        if self.aggregation not in ("uniform", "weighted"):
            raise ConfigError(f"aggregation: unknown mode {self.aggregation!r}")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")


def _check_keys(obj: dict, allowed, required, path: str):
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}{key}: unknown key")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{path}{key}: missing required key")


def _typed(obj: dict, key: str, types, path: str, default=None):
    if key not in obj:
        return default
    value = obj[key]
    if types is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, types) or isinstance(value, bool) and types is not bool:
        name = types.__name__ if isinstance(types, type) else "number"
        raise ConfigError(f"{path}{key}: expected {name}, got {type(value).__name__}")
    return value


_TOP_KEYS = {
    "seed", "devices", "selected", "rounds", "dataset", "channel",
    "power_dl", "power_ul", "local_steps", "batch_size", "learning_rate",
    "learner", "hidden_units", "optimizer", "aggregation", "baseline",
    "workers", "output_dir",
}
_TOP_REQUIRED = ["seed", "devices", "selected", "rounds", "dataset",
                 "channel", "power_dl", "power_ul"]


def _parse_dataset(obj, path="dataset."):
    if not isinstance(obj, dict):
        raise ConfigError("dataset: expected an object")
    kind = obj.get("kind")
    if kind == "synthetic":
        _check_keys(obj, {"kind", "classes", "per_class", "test_per_class",
                          "dim", "separation"}, ["kind"], path)
        return SyntheticData(
            classes=_typed(obj, "classes", int, path, 10),
            per_class=_typed(obj, "per_class", int, path, 100),
            test_per_class=_typed(obj, "test_per_class", int, path, 50),
            dim=_typed(obj, "dim", int, path, 20),
            separation=_typed(obj, "separation", float, path, 3.0),
        )
    if kind == "idx":
        _check_keys(obj, {"kind", "train_images", "train_labels", "test_images",
                          "test_labels", "num_classes", "per_class_limit"},
                    ["kind", "train_images", "train_labels",
                     "test_images", "test_labels"], path)
        return IdxData(
            train_images=_typed(obj, "train_images", str, path),
            train_labels=_typed(obj, "train_labels", str, path),
            test_images=_typed(obj, "test_images", str, path),
            test_labels=_typed(obj, "test_labels", str, path),
            num_classes=_typed(obj, "num_classes", int, path, 10),
            per_class_limit=_typed(obj, "per_class_limit", int, path, None),
        )
    raise ConfigError(f"{path}kind: must be 'synthetic' or 'idx', got {kind!r}")


def _parse_channel(obj, path="channel."):
    if not isinstance(obj, dict):
        raise ConfigError("channel: expected an object")
    _check_keys(obj, {"s_dl", "s_ul", "sigma2_dl", "sigma2_ul"},
                ["s_dl", "s_ul", "sigma2_dl", "sigma2_ul"], path)
    s_dl = _typed(obj, "s_dl", int, path)
    s_ul = _typed(obj, "s_ul", int, path)
    sigma2_dl = _typed(obj, "sigma2_dl", float, path)
    sigma2_ul = _typed(obj, "sigma2_ul", float, path)
    if s_dl < 1 or s_ul < 1:
        raise ConfigError(f"{path}s_dl/s_ul: must be >= 1")
    if sigma2_dl <= 0 or sigma2_ul <= 0:
        raise ConfigError(f"{path}sigma2_dl/sigma2_ul: must be positive")
    return s_dl, s_ul, sigma2_dl, sigma2_ul


def parse_config(obj: dict) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config root: expected a JSON object")
    _check_keys(obj, _TOP_KEYS, _TOP_REQUIRED, "")
    s_dl, s_ul, sigma2_dl, sigma2_ul = _parse_channel(obj["channel"])
    return ExperimentConfig(
        seed=_typed(obj, "seed", int, ""),
        devices=_typed(obj, "devices", int, ""),
        selected=_typed(obj, "selected", int, ""),
        rounds=_typed(obj, "rounds", int, ""),
        dataset=_parse_dataset(obj["dataset"]),
        s_dl=s_dl, s_ul=s_ul, sigma2_dl=sigma2_dl, sigma2_ul=sigma2_ul,
        power_dl=_typed(obj, "power_dl", float, ""),
        power_ul=_typed(obj, "power_ul", float, ""),
        local_steps=_typed(obj, "local_steps", int, "", 1),
        batch_size=_typed(obj, "batch_size", int, "", 32),
        learning_rate=_typed(obj, "learning_rate", float, "", 0.1),
        learner=_typed(obj, "learner", str, "", "logistic"),
        hidden_units=_typed(obj, "hidden_units", int, "", 32),
        optimizer=_typed(obj, "optimizer", str, "", "sgd"),
        aggregation=_typed(obj, "aggregation", str, "", "uniform"),
        baseline=_typed(obj, "baseline", bool, "", False),
        workers=_typed(obj, "workers", int, "", 1),
        output_dir=_typed(obj, "output_dir", str, "", "out"),
    )


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON experiment config file."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(obj)


def config_to_dict(config: ExperimentConfig) -> dict:
    return asdict(config)
