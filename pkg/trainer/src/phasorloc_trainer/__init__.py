"""Toy-scale training harness for the phasorloc complex-domain targets."""

from .config import ToyNetConfig, read_train_config, write_train_config
from .model import ToyMapNet
from .predict import load_checkpoint, predict
from .train import train

__version__ = "0.1.0"
