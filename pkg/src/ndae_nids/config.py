"""Flat key-value pipeline configuration.

The config file is plain text: one ``key = value`` per line, ``#`` comments,
blank lines ignored.  Every knob has a deterministic default; seeds are part
of the config so no run ever draws implicit entropy.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional


class ConfigError(Exception):
    """Unparseable, unknown, or out-of-range configuration; a usage error."""


@dataclass(frozen=True)
class PipelineConfig:
    # dataset
    train_path: str = ""
    test_path: str = ""
    format: str = "kdd99"             # kdd99 | nslkdd
    subsample_fraction: float = 1.0
    subsample_seed: int = 0

    # stacked feature extractor
    dims1: tuple[int, ...] = (32, 32, 32)
    dims2: tuple[int, ...] = (32, 32, 32)
    feature_mode: str = "deepest"     # deepest | concat
    learning_rate: float = 0.05
    epochs: int = 10
    batch_size: int = 256
    train_seed: int = 1

    # classifier
    classifier: str = "forest"        # forest | softmax
    n_trees: int = 100
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    mtry: Optional[int] = None
    forest_seed: int = 2
    n_jobs: int = 1

    # softmax baseline head (falls back to the main training knobs)
    softmax_learning_rate: Optional[float] = None
    softmax_epochs: Optional[int] = None
    softmax_batch_size: Optional[int] = None

    # reporting
    reference_path: str = ""

    # workspace layout (each command's --out overrides its own entry)
    prepared_dir: str = "out/prepared"
    model_dir: str = "out/model"
    report_dir: str = "out/report"


_INT_KEYS = {
    "subsample_seed", "epochs", "batch_size", "train_seed", "n_trees",
    "min_samples_split", "forest_seed", "n_jobs",
    "softmax_epochs", "softmax_batch_size",
}
_OPTIONAL_INT_KEYS = {"max_depth", "mtry", "softmax_epochs", "softmax_batch_size"}
_FLOAT_KEYS = {"subsample_fraction", "learning_rate", "softmax_learning_rate"}
_OPTIONAL_FLOAT_KEYS = {"softmax_learning_rate"}
_DIMS_KEYS = {"dims1", "dims2"}
_FIELD_NAMES = {f.name for f in fields(PipelineConfig)}


def _parse_value(key: str, raw: str):
    if key in _DIMS_KEYS:
        try:
            dims = tuple(int(p) for p in raw.split(",") if p.strip())
        except ValueError:
            raise ConfigError(f"{key}: expected comma-separated integers, got {raw!r}") from None
        if not dims or any(d <= 0 for d in dims):
            raise ConfigError(f"{key}: dims must be positive integers, got {raw!r}")
        return dims
    if key in _OPTIONAL_INT_KEYS and raw.lower() in ("", "none", "auto", "unlimited"):
        return None
    if key in _OPTIONAL_FLOAT_KEYS and raw.lower() in ("", "none", "auto"):
        return None
    if key in _INT_KEYS or key in _OPTIONAL_INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if key in _FLOAT_KEYS:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    return raw


def _validate(cfg: PipelineConfig) -> PipelineConfig:
    if cfg.format not in ("kdd99", "nslkdd"):
        raise ConfigError(f"format must be kdd99 or nslkdd, got {cfg.format!r}")
    if not 0.0 < cfg.subsample_fraction <= 1.0:
        raise ConfigError(f"subsample_fraction must lie in (0, 1], got {cfg.subsample_fraction}")
    if cfg.feature_mode not in ("deepest", "concat"):
        raise ConfigError(f"feature_mode must be deepest or concat, got {cfg.feature_mode!r}")
    if cfg.classifier not in ("forest", "softmax"):
        raise ConfigError(f"classifier must be forest or softmax, got {cfg.classifier!r}")
    if cfg.learning_rate <= 0:
        raise ConfigError("learning_rate must be positive")
    if cfg.epochs < 0:
        raise ConfigError("epochs must be non-negative")
    if cfg.batch_size <= 0 or cfg.n_trees <= 0 or cfg.min_samples_split <= 0:
        raise ConfigError("batch_size, n_trees, and min_samples_split must be positive")
    if cfg.n_jobs <= 0:
        raise ConfigError("n_jobs must be positive")
    for name in ("subsample_seed", "train_seed", "forest_seed"):
        if getattr(cfg, name) < 0:
            raise ConfigError(f"{name} must be a non-negative integer")
    return cfg


def parse_config(path) -> PipelineConfig:
    """Read and validate a config file; unknown keys are hard errors."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for line_number, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_number}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _FIELD_NAMES:
            raise ConfigError(f"{path}:{line_number}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{line_number}: duplicate key {key!r}")
        values[key] = _parse_value(key, value)
    return _validate(PipelineConfig(**values))


def override_seeds(cfg: PipelineConfig, seed: int) -> PipelineConfig:
    """Apply a --seed override: every configured seed becomes this value."""
    if seed < 0:
        raise ConfigError("--seed must be a non-negative integer")
    return _validate(replace(cfg, subsample_seed=seed, train_seed=seed, forest_seed=seed))


def _canonical_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# execution/layout knobs that provably cannot change any output byte; they
# stay out of the config hash so e.g. a parallel run hashes like a serial one
_HASH_EXEMPT = {"n_jobs", "prepared_dir", "model_dir", "report_dir"}


def canonical_text(cfg: PipelineConfig) -> str:
    """Stable serialization of the effective config, used for hashing."""
    lines = [
        f"{f.name} = {_canonical_value(getattr(cfg, f.name))}"
        for f in fields(PipelineConfig)
        if f.name not in _HASH_EXEMPT
    ]
    return "\n".join(sorted(lines)) + "\n"


def config_hash(cfg: PipelineConfig) -> str:
    return hashlib.sha256(canonical_text(cfg).encode()).hexdigest()


def softmax_train_knobs(cfg: PipelineConfig) -> tuple[float, int, int]:
    """(learning_rate, epochs, batch_size) for the softmax head, with fallbacks."""
    lr = cfg.softmax_learning_rate if cfg.softmax_learning_rate is not None else cfg.learning_rate
    epochs = cfg.softmax_epochs if cfg.softmax_epochs is not None else cfg.epochs
    batch = cfg.softmax_batch_size if cfg.softmax_batch_size is not None else cfg.batch_size
    return lr, epochs, batch
