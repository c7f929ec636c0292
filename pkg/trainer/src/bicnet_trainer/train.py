"""Training loop with the multiscale masked cross-entropy objective."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch.utils.data import DataLoader

from .data import IGNORE_INDEX, SafetyImageDataset
from .model import Bicnet, save_model

# coarse-to-fine auxiliary loss weights (finest last)
BRANCH_WEIGHTS = (1.0, 0.4, 0.16)


@dataclass
class TrainConfig:
    epochs: int = 15
    batch_size: int = 16
    learning_rate: float = 2e-3
    width: int = 8
    seed: int = 0
    mask_shadow: bool = False

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(**json.load(fh))


def masked_cross_entropy(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Cross entropy over pixels whose label is not the ignore index.

    The target map is nearest-subsampled to the logits' resolution, so the
    same codes (and masking) apply at every scale.
    """
    h, w = logits.shape[-2:]
    lh, lw = labels.shape[-2:]
    if (lh, lw) != (h, w):
        si, sj = lh // h, lw // w
        labels = labels[:, ::si, ::sj]
    return F.cross_entropy(logits, labels, ignore_index=IGNORE_INDEX)


def multiscale_loss(outputs, labels: torch.Tensor) -> torch.Tensor:
    total = 0.0
    for weight, logits in zip(BRANCH_WEIGHTS, outputs):
        total = total + weight * masked_cross_entropy(logits, labels)
    return total


def train(
    data_dir,
    out_path,
    config: TrainConfig | None = None,
    loss_curve_path=None,
) -> tuple[Bicnet, list[float]]:
    """Train on a toolkit dataset; returns the model and per-epoch mean loss."""
    config = config or TrainConfig()
    torch.manual_seed(config.seed)
    dataset = SafetyImageDataset(data_dir, mask_shadow=config.mask_shadow)
    loader = DataLoader(
        dataset,
        batch_size=config.batch_size,
        shuffle=True,
        generator=torch.Generator().manual_seed(config.seed),
        num_workers=0,
    )
    model = Bicnet(width=config.width)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)

    curve: list[float] = []
    for _ in range(config.epochs):
        losses = []
        for images, labels, _ in loader:
            if bool((labels == IGNORE_INDEX).all()):
                raise ValueError("batch contains no labeled pixels")
            optimizer.zero_grad()
            outputs = model(images)
            loss = multiscale_loss(outputs, labels)
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
        curve.append(float(np.mean(losses)))

    model.eval()
    if out_path is not None:
        save_model(out_path, model, config.width)
    if loss_curve_path is not None:
        Path(loss_curve_path).write_text(json.dumps({"loss": curve}, indent=2) + "\n")
    return model, curve
