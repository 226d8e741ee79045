"""JSON run configuration.

A run file looks like::

    {
      "variant": "asym",
      "task": {"tiers": [{"modulus": 2, "length": 3, "count": 8}, ...],
               "n_digits": 4, "max_len": 3},
      "task_seed": 0,
      "train": {"learning_rate": 0.01, "total_steps": 300, ...},
      "format": "csv"
    }

Every key is optional.  ``train`` accepts any :class:`TrainConfig` field
except ``advantage_spec``, which always comes from the variant preset.
Resolution order: built-in defaults, then the file, then the preset's own
fields (e.g. ``eps_high`` for the clip-higher variants), then command-line
flags.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .advantage import AdvantageSpec
from .env import TaskConfig
from .presets import PRESETS, apply_preset, describe
from .trainer import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    variant: str = "grpo"
    task: TaskConfig = field(default_factory=TaskConfig)
    task_seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    format: str = "csv"

    def header(self) -> dict:
        """Effective settings echoed into metric files."""
        return {
            "preset": describe(self.variant, self.train.group_size),
            "task": self.task.to_dict(),
            "task_seed": self.task_seed,
            "train": self.train.to_dict(),
        }

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, train=replace(self.train, seed=seed))


_TOP_KEYS = {"variant", "task", "task_seed", "train", "format"}


def parse_run_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    variant = data.get("variant", "grpo")
    if variant not in PRESETS:
        raise ConfigError(f"unknown variant {variant!r}; choose from {sorted(PRESETS)}")
    fmt = data.get("format", "csv")
    if fmt not in ("csv", "jsonl"):
        raise ConfigError(f"format must be csv or jsonl, got {fmt!r}")
    train = dict(data.get("train", {}))
    if "advantage_spec" in train:
        raise ConfigError("advantage_spec is set by the variant; use 'variant' instead")
    try:
        task = TaskConfig.from_dict(data.get("task", {}))
        fields = set(TrainConfig.__dataclass_fields__)
        bad = set(train) - fields
        if bad:
            raise ConfigError(f"unknown train keys: {sorted(bad)}")
        if "adam_betas" in train:
            train["adam_betas"] = tuple(train["adam_betas"])
        G = train.get("group_size", TrainConfig.group_size)
        base = TrainConfig(**train, advantage_spec=AdvantageSpec(group_size=G))
        cfg = apply_preset(variant, base)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(variant, task, int(data.get("task_seed", 0)), cfg, fmt)


def load_run_config(path: str | Path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_run_config(data)


def load_suite(path: str | Path) -> tuple[list[str], dict]:
    """A suite file is a run file plus a ``variants`` list."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read suite {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("suite must be a JSON object")
    variants = data.pop("variants", None)
    if not isinstance(variants, list) or len(variants) < 2:
        raise ConfigError("a suite lists at least two variants")
    if len(set(variants)) != len(variants):
        raise ConfigError("duplicate variants in suite")
    for v in variants:
        parse_run_config({**data, "variant": v})
    return variants, data
