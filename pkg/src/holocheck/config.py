"""Experiment configuration: one YAML file drives every CLI subcommand.

The schema mirrors the pipeline stages (dataset, splits, training, decision,
baseline, output). Every artifact the pipeline writes is stamped with the
seed and a short hash of the resolved configuration so results can be tied
back to the exact settings that produced them.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .baseline import BaselineParams
from .encoder import TrainConfig
from .triplets import AugConfig

log = logging.getLogger(__name__)

CONFIG_VERSION = 1


@dataclass
class DatasetConfig:
    root: str = "data/synthetic"
    kind: str = "synthetic"          # synthetic | midv_holo | midv_2020
    roi_config: str | None = None    # defaults to <root>/roi.yaml
    target_fps: float | None = None  # resample when set

    def roi_path(self) -> Path:
        return Path(self.roi_config) if self.roi_config \
            else Path(self.root) / "roi.yaml"


@dataclass
class SplitConfig:
    n_runs: int = 5


@dataclass
class DecisionConfig:
    strategy: str = "whole"          # whole | cumulative
    min_buffer: int = 5


@dataclass
class OutputConfig:
    dir: str = "runs"


@dataclass
class ExperimentConfig:
    version: int = CONFIG_VERSION
    seed: int = 0
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    splits: SplitConfig = field(default_factory=SplitConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    decision: DecisionConfig = field(default_factory=DecisionConfig)
    baseline: BaselineParams = field(default_factory=BaselineParams)
    output: OutputConfig = field(default_factory=OutputConfig)


_SECTION_TYPES = {
    "dataset": DatasetConfig,
    "splits": SplitConfig,
    "train": TrainConfig,
    "decision": DecisionConfig,
    "baseline": BaselineParams,
    "output": OutputConfig,
}


def _build_section(cls, data: dict, context: str):
    if not isinstance(data, dict):
        raise ValueError(f"config section {context!r} must be a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ValueError(f"unknown config key {context}.{key}")
        if key == "aug" and isinstance(value, dict):
            value = _build_section(AugConfig, value, f"{context}.aug")
        elif key in ("blur_kernels", "blur_sigma", "brightness", "contrast",
                     "saturation", "mean", "std", "working_size") and \
                isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


def load_config(path: Path | str) -> ExperimentConfig:
    raw = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(raw, dict):
        raise ValueError(f"config root must be a mapping: {path}")
    version = raw.pop("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ValueError(f"unsupported config version {version}")
    seed = raw.pop("seed", 0)
    sections = {}
    for name, cls in _SECTION_TYPES.items():
        if name in raw:
            sections[name] = _build_section(cls, raw.pop(name), name)
    if raw:
        raise ValueError(f"unknown config sections: {sorted(raw)}")
    return ExperimentConfig(version=version, seed=int(seed), **sections)


def config_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def save_config(cfg: ExperimentConfig, path: Path | str) -> None:
    Path(path).write_text(yaml.safe_dump(config_dict(cfg), sort_keys=True))


def config_hash(cfg: ExperimentConfig) -> str:
    """Short stable digest of the resolved configuration."""
    blob = json.dumps(config_dict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def artifact_stamp(cfg: ExperimentConfig) -> dict:
    return {"seed": cfg.seed, "config_hash": config_hash(cfg)}
