"""Toy Bayesian ICNet trainer for landing-safety segmentation."""

__version__ = "0.1.0"

from .data import IGNORE_INDEX, SafetyImageDataset
from .infer import infer_directory, mc_forward, write_stack
from .model import Bicnet, enable_mc_dropout, load_model, save_model
from .train import TrainConfig, multiscale_loss, train

__all__ = [
    "Bicnet",
    "IGNORE_INDEX",
    "SafetyImageDataset",
    "TrainConfig",
    "enable_mc_dropout",
    "infer_directory",
    "load_model",
    "mc_forward",
    "multiscale_loss",
    "save_model",
    "train",
    "write_stack",
]
