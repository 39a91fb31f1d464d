"""Trainer configuration, stored in the same key = value file format the
main package uses for run configs."""

from dataclasses import dataclass
from pathlib import Path

from phasorloc.errors import ValidationError
from phasorloc.formats import format_keyvalues, parse_keyvalues

TRAIN_SCHEMA = {
    "train.depth": ("int", 3),
    "train.base_channels": ("int", 16),
    "train.upsample_mode": ("str", "bilinear"),
    "train.epochs": ("int", 16),
    "train.batch_size": ("int", 16),
    "train.lr": ("float", 0.002),
    "train.val_fraction": ("float", 0.1),
    "train.seed": ("int", 0),
}


@dataclass
class ToyNetConfig:
    """Miniature encoder-decoder hyperparameters.

    Loss is MSE over both output channels, optimization is Adam with a
    step-wise halving schedule (the learning rate halves at each quarter of
    the epoch budget). The output is always 2 x 4H x 4W for an H x W frame.
    """

    depth: int = 3
    base_channels: int = 16
    upsample_mode: str = "bilinear"
    epochs: int = 16
    batch_size: int = 16
    lr: float = 0.002
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.depth < 1:
            raise ValidationError("depth must be >= 1")
        if self.base_channels < 1:
            raise ValidationError("base_channels must be >= 1")
        if self.upsample_mode not in ("bilinear", "nearest"):
            raise ValidationError("upsample_mode must be bilinear or nearest")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("epochs and batch_size must be >= 1")
        if self.lr <= 0:
            raise ValidationError("lr must be positive")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValidationError("val_fraction must be in [0, 1)")


def read_train_config(path) -> ToyNetConfig:
    values = {key: default for key, (_, default) in TRAIN_SCHEMA.items()}
    values.update(parse_keyvalues(Path(path).read_text(), TRAIN_SCHEMA,
                                  path=path))
    return ToyNetConfig(
        depth=values["train.depth"],
        base_channels=values["train.base_channels"],
        upsample_mode=values["train.upsample_mode"],
        epochs=values["train.epochs"],
        batch_size=values["train.batch_size"],
        lr=values["train.lr"],
        val_fraction=values["train.val_fraction"],
        seed=values["train.seed"])


def write_train_config(path, cfg: ToyNetConfig) -> None:
    values = {
        "train.depth": cfg.depth,
        "train.base_channels": cfg.base_channels,
        "train.upsample_mode": cfg.upsample_mode,
        "train.epochs": cfg.epochs,
        "train.batch_size": cfg.batch_size,
        "train.lr": cfg.lr,
        "train.val_fraction": cfg.val_fraction,
        "train.seed": cfg.seed,
    }
    Path(path).write_text(format_keyvalues(values, TRAIN_SCHEMA))
