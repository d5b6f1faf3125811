"""Run configuration: one JSON document drives every command.

Every field is optional; defaults are the desk-scale profile so the
whole pipeline stays fast on a CPU.  The full-scale profile (256x256
inputs, channels (100, 200), fully connected (400, 200)) ships alongside
and can be selected by pointing --config at it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from .autoencoder import CAEConfig
from .classifier import CNNConfig
from .errors import ConfigError
from .optim import SGDConfig


@dataclass(frozen=True)
class RunConfig:
    input_size: tuple[int, int] = (64, 64)
    conv_channels: tuple[int, int] = (8, 16)
    fc_sizes: tuple[int, int] = (64, 32)
    n_classes: int = 3
    input_channels: int = 3
    kernel: int = 5
    corruption_fraction: float = 0.2
    lr0: float = 0.01
    decay: float = 0.98
    batch_size: int = 16
    epochs_pretrain: int = 30
    epochs_finetune: int = 50
    folds: int = 10
    seed: int = 0
    tied_decoder: bool = True
    freeze_encoder: bool = False
    threads: int = 1
    data_root: str = "."
    pretrain_manifest: str | None = None
    labeled_manifest: str | None = None
    checkpoint_dir: str = "checkpoints"
    report_dir: str = "reports"

    def cae_config(self) -> CAEConfig:
        return CAEConfig(
            input_size=self.input_size,
            conv_channels=self.conv_channels,
            input_channels=self.input_channels,
            kernel=self.kernel,
            tied_decoder=self.tied_decoder,
            corruption_fraction=self.corruption_fraction,
        )

    def cnn_config(self) -> CNNConfig:
        return CNNConfig(
            fc_sizes=self.fc_sizes,
            n_classes=self.n_classes,
            freeze_encoder=self.freeze_encoder,
        )

    def sgd_config(self) -> SGDConfig:
        return SGDConfig(lr0=self.lr0, decay=self.decay, batch_size=self.batch_size)

    def resolved(self) -> dict:
        """Every field, defaults filled in, as plain JSON-ready values."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


_TUPLE_FIELDS = {"input_size", "conv_channels", "fc_sizes"}
_INT_FIELDS = {"n_classes", "input_channels", "kernel", "batch_size", "epochs_pretrain",
               "epochs_finetune", "folds", "seed", "threads"}
_FLOAT_FIELDS = {"corruption_fraction", "lr0", "decay"}
_BOOL_FIELDS = {"tied_decoder", "freeze_encoder"}
_STR_FIELDS = {"data_root", "checkpoint_dir", "report_dir"}
_OPT_STR_FIELDS = {"pretrain_manifest", "labeled_manifest"}


def config_from_dict(raw: dict, source: str = "<dict>") -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{source}: unknown config keys {sorted(unknown)}")

    kwargs = {}
    for key, value in raw.items():
        if key in _TUPLE_FIELDS:
            if not (isinstance(value, (list, tuple)) and len(value) == 2
                    and all(isinstance(v, int) and not isinstance(v, bool) for v in value)):
                raise ConfigError(f"{source}: {key} must be a pair of integers, got {value!r}")
            kwargs[key] = tuple(value)
        elif key in _INT_FIELDS:
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{source}: {key} must be an integer, got {value!r}")
            kwargs[key] = value
        elif key in _FLOAT_FIELDS:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{source}: {key} must be a number, got {value!r}")
            kwargs[key] = float(value)
        elif key in _BOOL_FIELDS:
            if not isinstance(value, bool):
                raise ConfigError(f"{source}: {key} must be a boolean, got {value!r}")
            kwargs[key] = value
        elif key in _STR_FIELDS:
            if not isinstance(value, str):
                raise ConfigError(f"{source}: {key} must be a string, got {value!r}")
            kwargs[key] = value
        elif key in _OPT_STR_FIELDS:
            if value is not None and not isinstance(value, str):
                raise ConfigError(f"{source}: {key} must be a string or null, got {value!r}")
            kwargs[key] = value

    config = RunConfig(**kwargs)
    # surface range violations now, with the file named, not mid-run
    try:
        config.cae_config()
        config.cnn_config()
        config.sgd_config()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if config.epochs_pretrain < 0 or config.epochs_finetune < 0:
        raise ConfigError(f"{source}: epoch counts must be >= 0")
    if config.folds < 2:
        raise ConfigError(f"{source}: folds must be >= 2, got {config.folds}")
    if config.threads < 1:
        raise ConfigError(f"{source}: threads must be >= 1, got {config.threads}")
    return config


def load_run_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{p}: top level must be a JSON object")
    return config_from_dict(raw, source=str(p))


def _profile(name: str) -> RunConfig:
    text = (resources.files("paintnet.assets") / f"{name}.json").read_text(encoding="utf-8")
    return config_from_dict(json.loads(text), source=f"profile:{name}")


def desk_profile() -> RunConfig:
    """Small architecture for fast CPU runs; the package default."""
    return _profile("desk")


def full_profile() -> RunConfig:
    """Full-scale architecture: 256x256, channels (100, 200), FC (400, 200)."""
    return _profile("full")
