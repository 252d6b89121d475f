"""Experiment configuration: YAML loading, validation and presets.

A config file is a key-value tree with sections ``code``, ``train``,
``eval`` and optionally ``ensemble``, plus top-level ``output_dir`` and
``seed``. Named presets ship with the package (``tiny16`` for the desk-scale
(16, 7) setup, ``paper256`` for the (256, 37) configuration with the five
SMART training-SNR pairs).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .crc import CRC_PRESETS
from .errors import ConfigurationError
from .losses import LossConfig, SchedulerConfig
from .polar import CodeConfig, build_info_set
from .training import TrainConfig


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigurationError(f"config field '{where}.{key}' is missing")
    return mapping[key]


def _opt(mapping: dict, key: str, default):
    return mapping.get(key, default)


@dataclass(frozen=True)
class EvalConfig:
    snr_db: tuple[float, ...] = (0.0, 1.0, 2.0, 3.0, 4.0)
    min_block_errors: int = 100
    max_blocks: int = 20_000
    batch_blocks: int = 1024

    def __post_init__(self):
        if not self.snr_db:
            raise ConfigurationError("eval.snr_db must be a nonempty list")
        if self.min_block_errors < 1 or self.max_blocks < 1:
            raise ConfigurationError("eval counters must be >= 1")


@dataclass(frozen=True)
class EnsembleFileSpec:
    """File-level ensemble description: checkpoint paths plus CRC preset."""

    checkpoints: tuple[str, ...]
    snr_pairs: tuple[tuple[float, float] | None, ...]
    labels: tuple[str, ...]
    crc: str = "crc8"
    fallback_index: int = 1

    def __post_init__(self):
        if not self.checkpoints:
            raise ConfigurationError("ensemble.models must be a nonempty list")
        if self.crc not in CRC_PRESETS:
            raise ConfigurationError(
                f"ensemble.crc must be one of {sorted(CRC_PRESETS)}, got {self.crc!r}")
        if not 1 <= self.fallback_index <= len(self.checkpoints):
            raise ConfigurationError("ensemble.fallback_index out of range")


@dataclass(frozen=True)
class ExperimentConfig:
    code: CodeConfig
    train: TrainConfig
    eval: EvalConfig
    ensemble: EnsembleFileSpec | None
    output_dir: str
    seed: int
    raw: dict = field(compare=False, default_factory=dict)

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        ).hexdigest()


def _parse_code(section: dict) -> CodeConfig:
    n = int(_require(section, "n", "code"))
    k = int(_require(section, "k", "code"))
    ell = int(_require(section, "ell", "code"))
    design = float(_opt(section, "design_snr_db", -2.0))
    return build_info_set(n, k, ell, design)


def _parse_train(section: dict, seed: int) -> TrainConfig:
    sched = _opt(section, "scheduler", {}) or {}
    arch = _opt(section, "arch", {}) or {}
    snr_pair = _opt(section, "snr_pair", (0.0, -2.0))
    if len(snr_pair) != 2:
        raise ConfigurationError("train.snr_pair must be a [encoder, decoder] pair")
    snr_range = _opt(section, "snr_sample_range", None)
    try:
        return TrainConfig(
            epochs=int(_require(section, "epochs", "train")),
            steps_per_epoch=int(_opt(section, "steps_per_epoch", 10)),
            batch_size=int(_require(section, "batch_size", "train")),
            learning_rate=float(_opt(section, "learning_rate", 1e-3)),
            snr_pair=(float(snr_pair[0]), float(snr_pair[1])),
            scheduler=SchedulerConfig(
                t0=int(_opt(sched, "t0", 50)),
                tmult=int(_opt(sched, "tmult", 2)),
                min_lr=float(_opt(sched, "min_lr", 1e-5)),
            ),
            enc_dec_step_ratio=int(_opt(section, "enc_dec_step_ratio", 5)),
            seed=seed,
            design_snr_db=float(_opt(section, "design_snr_db", -2.0)),
            phase1_epochs=int(_opt(section, "phase1_epochs", 10)),
            val_batch_size=int(_opt(section, "val_batch_size", 2000)),
            checkpoint_every=int(_opt(section, "checkpoint_every", 0)),
            snr_sample_range=(tuple(float(v) for v in snr_range) if snr_range else None),
            loss=LossConfig(epsilon=float(_opt(section, "loss_epsilon", 1e-10))),
            decoder_arch=str(_opt(arch, "decoder", "attention")),
            enc_hidden=int(_opt(arch, "enc_hidden", 64)),
            enc_layers=int(_opt(arch, "enc_layers", 3)),
            enc_skip_layers=int(_opt(arch, "enc_skip_layers", 2)),
            alpha=float(_opt(arch, "alpha", 1.0)),
            dec_hidden=int(_opt(arch, "dec_hidden", 128)),
            dec_layers=int(_opt(arch, "dec_layers", 3)),
            heads=int(_opt(arch, "heads", 4)),
            d_k=int(_opt(arch, "d_k", 32)),
            dropout_rate=float(_opt(arch, "dropout_rate", 0.1)),
        )
    except (TypeError, ValueError) as err:
        raise ConfigurationError(f"invalid train section: {err}") from err


def _parse_eval(section: dict) -> EvalConfig:
    return EvalConfig(
        snr_db=tuple(float(v) for v in _opt(section, "snr_db", [0, 1, 2, 3, 4])),
        min_block_errors=int(_opt(section, "min_block_errors", 100)),
        max_blocks=int(_opt(section, "max_blocks", 20_000)),
        batch_blocks=int(_opt(section, "batch_blocks", 1024)),
    )


def _parse_ensemble(section: dict, base_dir: Path) -> EnsembleFileSpec:
    models = _require(section, "models", "ensemble")
    checkpoints, snr_pairs, labels = [], [], []
    for i, entry in enumerate(models):
        path = Path(_require(entry, "checkpoint", f"ensemble.models[{i}]"))
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigurationError(f"ensemble.models[{i}].checkpoint not found: {path}")
        checkpoints.append(str(path))
        pair = entry.get("snr_pair")
        snr_pairs.append(tuple(float(v) for v in pair) if pair else None)
        labels.append(str(entry.get("label", f"model{i + 1}")))
    return EnsembleFileSpec(
        checkpoints=tuple(checkpoints),
        snr_pairs=tuple(snr_pairs),
        labels=tuple(labels),
        crc=str(_opt(section, "crc", "crc8")),
        fallback_index=int(_opt(section, "fallback_index", 1)),
    )


def preset_path(name: str) -> Path:
    candidate = resources.files("neuralpolar").joinpath(f"presets/{name}.yaml")
    if not candidate.is_file():
        raise ConfigurationError(f"unknown preset {name!r}")
    return Path(str(candidate))


def load_experiment(path_or_preset: str | Path,
                    seed_override: int | None = None,
                    output_dir_override: str | None = None) -> ExperimentConfig:
    """Load and validate a config file (or a named preset)."""
    path = Path(path_or_preset)
    if not path.exists() and not str(path_or_preset).endswith(".yaml"):
        path = preset_path(str(path_or_preset))
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    with open(path) as f:
        raw = yaml.safe_load(f)
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: config must be a mapping")
    seed = int(raw.get("seed", 0)) if seed_override is None else int(seed_override)
    code = _parse_code(_require(raw, "code", "<root>"))
    train = _parse_train(_require(raw, "train", "<root>"), seed)
    eval_cfg = _parse_eval(raw.get("eval", {}) or {})
    ensemble = None
    if raw.get("ensemble"):
        ensemble = _parse_ensemble(raw["ensemble"], path.parent)
    output_dir = output_dir_override or str(raw.get("output_dir", "runs/experiment"))
    return ExperimentConfig(code=code, train=train, eval=eval_cfg, ensemble=ensemble,
                            output_dir=output_dir, seed=seed, raw=raw)
