"""Run configuration: a JSON file validated up front and echoed into reports."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .corpus import read_word_list
from .dro import DroConfig
from .errors import ConfigError, FeatureError, LearnerError, MissingFileError
from .features import FeatureBlock, FeatureConfig
from .learner import TrainConfig
from .pipeline import PipelineConfig, SegmentationConfig


@dataclass
class RunConfig:
    raw: dict  # verbatim copy embedded in every report
    config_dir: Path
    manifest: Path
    pipeline: PipelineConfig
    seed: int
    output_dir: Path
    disputed_id: str | None
    similar_top_k: int
    threads: int


def _require(mapping: dict, key: str, kind, where: str):
    if key not in mapping:
        raise ConfigError(f"{where}: missing required key {key!r}")
    value = mapping[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"{where}: key {key!r} must be of type {kind.__name__}")
    return value


def _optional(mapping: dict, key: str, kind, default, where: str):
    if key not in mapping or mapping[key] is None:
        return default
    return _require(mapping, key, kind, where)


def _parse_features(section: Any, base: Path) -> FeatureConfig:
    if not isinstance(section, dict):
        raise ConfigError("'features' must be an object")
    blocks_raw = _require(section, "blocks", list, "features")
    try:
        blocks = frozenset(FeatureBlock(b) for b in blocks_raw)
    except ValueError as exc:
        raise ConfigError(f"features.blocks: {exc}") from None
    orders_raw = _optional(section, "ngram_orders", dict, {}, "features")
    orders = {}
    for name, values in orders_raw.items():
        try:
            block = FeatureBlock(name)
        except ValueError:
            raise ConfigError(f"features.ngram_orders: unknown block {name!r}") from None
        if not isinstance(values, list) or not all(isinstance(v, int) for v in values):
            raise ConfigError(f"features.ngram_orders.{name}: must be a list of integers")
        orders[block] = frozenset(values)

    def load_list(key: str) -> tuple[str, ...]:
        rel = _optional(section, key, str, None, "features")
        if rel is None:
            return ()
        try:
            return read_word_list(base / rel)
        except MissingFileError as exc:
            raise ConfigError(str(exc)) from None

    try:
        return FeatureConfig(
            enabled_blocks=blocks,
            ngram_orders=orders,
            function_words=load_list("function_word_list"),
            verbal_endings=load_list("verbal_ending_list"),
        )
    except FeatureError as exc:
        raise ConfigError(f"features: {exc}") from None


def _parse_segmentation(section: Any) -> SegmentationConfig:
    if section is None:
        return SegmentationConfig()
    if not isinstance(section, dict):
        raise ConfigError("'segmentation' must be an object")
    return SegmentationConfig(
        min_tokens=_optional(section, "min_tokens", int, 400, "segmentation"),
        include_full_texts=_optional(section, "include_full_texts", bool, True, "segmentation"),
    )


def _parse_dro(section: Any) -> DroConfig | None:
    if section is None:
        return None
    if not isinstance(section, dict):
        raise ConfigError("'dro' must be an object")
    if not _optional(section, "enabled", bool, True, "dro"):
        return None
    try:
        return DroConfig(
            target_positive_ratio=_optional(section, "target_positive_ratio", float, 0.20, "dro"),
            latent_dimension=_optional(section, "latent_dimension", int, None, "dro"),
            samples_per_extension=_optional(section, "samples_per_extension", int, None, "dro"),
        )
    except Exception as exc:
        raise ConfigError(f"dro: {exc}") from None


def _parse_learner(section: Any) -> TrainConfig:
    if section is None:
        return TrainConfig()
    if not isinstance(section, dict):
        raise ConfigError("'learner' must be an object")
    grid_raw = _optional(section, "C_grid", list, list(TrainConfig().C_grid), "learner")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in grid_raw):
        raise ConfigError("learner.C_grid must be a list of numbers")
    try:
        return TrainConfig(
            C=_optional(section, "C", float, 1.0, "learner"),
            C_grid=tuple(float(v) for v in grid_raw),
            inner_folds=_optional(section, "inner_folds", int, 5, "learner"),
            tolerance=_optional(section, "tolerance", float, 1e-6, "learner"),
            max_iterations=_optional(section, "max_iterations", int, 1000, "learner"),
        )
    except LearnerError as exc:
        raise ConfigError(f"learner: {exc}") from None


def load_run_config(path: Path | str) -> RunConfig:
    """Parse and validate a JSON run configuration."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    base = path.parent

    manifest_rel = _require(raw, "manifest", str, "config")
    features = _parse_features(raw.get("features"), base)
    pipeline = PipelineConfig(
        features=features,
        segmentation=_parse_segmentation(raw.get("segmentation")),
        learner=_parse_learner(raw.get("learner")),
        dro=_parse_dro(raw.get("dro")),
        target_author=_optional(raw, "target_author", str, None, "config"),
    )
    output_rel = _optional(raw, "output_dir", str, "stylauth-out", "config")
    return RunConfig(
        raw=raw,
        config_dir=base,
        manifest=base / manifest_rel,
        pipeline=pipeline,
        seed=_optional(raw, "seed", int, 0, "config"),
        output_dir=base / output_rel,
        disputed_id=_optional(raw, "disputed_id", str, None, "config"),
        similar_top_k=_optional(raw, "similar_top_k", int, 10, "config"),
        threads=_optional(raw, "threads", int, 1, "config"),
    )
