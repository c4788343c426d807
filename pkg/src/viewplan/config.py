"""Experiment configuration: one JSON document, strict about unknown keys."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .expert import ExpertConfig
from .policy.model import ModelConfig


class ConfigError(ValueError):
    pass


def _build(cls, d: dict, context: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{context} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown key(s) in {context}: {sorted(unknown)}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {context}: {e}") from e


@dataclass(frozen=True)
class SceneGenConfig:
    n_scenes: int = 10
    difficulty: str = "medium"
    seed: int = 0
    r_min: float = 0.3
    r_max: float = 0.6


@dataclass(frozen=True)
class TrainingConfig:
    lr: float = 1e-4
    epochs: int = 300
    batch_size: int = 16
    seed: int = 0
    beta: float = 10.0


@dataclass(frozen=True)
class EvalConfig:
    n_eval_scenes: int = 15
    n_starts: int = 1
    max_steps: int = 50
    tau_v: float = 0.95
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    scenes: SceneGenConfig = SceneGenConfig()
    expert: ExpertConfig = ExpertConfig()
    model: ModelConfig = ModelConfig()
    training: TrainingConfig = TrainingConfig()
    evaluation: EvalConfig = EvalConfig()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("experiment config must be a JSON object")
        known = {"scenes", "expert", "model", "training", "evaluation"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
        blocks = {}
        for name, block_cls in (
            ("scenes", SceneGenConfig),
            ("expert", ExpertConfig),
            ("training", TrainingConfig),
            ("evaluation", EvalConfig),
        ):
            if name in d:
                blocks[name] = _build(block_cls, d[name], name)
        if "model" in d:
            m = dict(d["model"])
            names = {f.name for f in dataclasses.fields(ModelConfig)}
            unknown = set(m) - names
            if unknown:
                raise ConfigError(f"unknown key(s) in model: {sorted(unknown)}")
            for key in ("backbone_channels", "image_size"):
                if key in m:
                    m[key] = tuple(m[key])
            try:
                blocks["model"] = ModelConfig(**m)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"invalid model: {e}") from e
        return cls(**blocks)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"config is not valid JSON: {e}") from e
        return cls.from_dict(d)
