"""Toy Bayesian ICNet: a three-branch cascade segmentation network.

Branches consume the image at full, half, and quarter resolution; cascade
feature fusion (CFF) modules merge coarse maps into finer ones, each
emitting an auxiliary prediction for the multiscale loss. Dropout (p=0.5)
sits after the central encoder and decoder blocks of the deepest branch
only, so stochastic forward passes sample the weights there while the rest
of the network stays deterministic. Channel counts are scaled far below the
original architecture; this model targets desk-scale experiments.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

NUM_CLASSES = 2  # 0 unsafe, 1 safe


def conv_bn_relu(c_in: int, c_out: int, stride: int = 1, dilation: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(
            c_in, c_out, 3, stride=stride, padding=dilation, dilation=dilation, bias=False
        ),
        nn.BatchNorm2d(c_out),
        nn.ReLU(inplace=True),
    )


class CascadeFeatureFusion(nn.Module):
    """Fuse an upsampled coarse map with a finer map; emit aux logits."""

    def __init__(self, c_low: int, c_high: int, c_out: int):
        super().__init__()
        self.conv_low = nn.Sequential(
            nn.Conv2d(c_low, c_out, 3, padding=2, dilation=2, bias=False),
            nn.BatchNorm2d(c_out),
        )
        self.conv_high = nn.Sequential(
            nn.Conv2d(c_high, c_out, 1, bias=False),
            nn.BatchNorm2d(c_out),
        )
        self.aux = nn.Conv2d(c_low, NUM_CLASSES, 1)

    def forward(self, low: torch.Tensor, high: torch.Tensor):
        low_up = F.interpolate(low, size=high.shape[-2:], mode="bilinear", align_corners=False)
        aux_logits = self.aux(low_up)
        fused = F.relu(self.conv_low(low_up) + self.conv_high(high), inplace=True)
        return fused, aux_logits


class Bicnet(nn.Module):
    def __init__(self, width: int = 8, dropout_p: float = 0.5):
        super().__init__()
        w = width
        self.branch_full = nn.Sequential(
            conv_bn_relu(1, w, stride=2),
            conv_bn_relu(w, 2 * w, stride=2),
        )  # 1/4 resolution
        self.branch_half = nn.Sequential(
            conv_bn_relu(1, w, stride=2),
            conv_bn_relu(w, 2 * w, stride=2),
        )  # 1/8 (input already 1/2)
        self.branch_quarter = nn.Sequential(
            conv_bn_relu(1, w, stride=2),
            conv_bn_relu(w, 2 * w, stride=2),
        )  # 1/16 (input already 1/4)
        self.central_encoder = nn.Sequential(
            conv_bn_relu(2 * w, 4 * w),
            nn.Dropout2d(dropout_p),
        )
        self.central_decoder = nn.Sequential(
            conv_bn_relu(4 * w, 2 * w, dilation=2),
            nn.Dropout2d(dropout_p),
        )
        self.cff_coarse = CascadeFeatureFusion(2 * w, 2 * w, 2 * w)  # 1/16 -> 1/8
        self.cff_fine = CascadeFeatureFusion(2 * w, 2 * w, 2 * w)    # 1/8 -> 1/4
        self.head = nn.Conv2d(2 * w, NUM_CLASSES, 1)

    def forward(self, x: torch.Tensor):
        """Returns (full-res logits, aux logits at 1/4, aux logits at 1/8)."""
        x_half = F.avg_pool2d(x, 2)
        x_quarter = F.avg_pool2d(x, 4)
        f_full = self.branch_full(x)
        f_half = self.branch_half(x_half)
        f_quarter = self.branch_quarter(x_quarter)
        f_quarter = self.central_decoder(self.central_encoder(f_quarter))
        fused_mid, aux_eighth = self.cff_coarse(f_quarter, f_half)
        fused_fine, aux_quarter = self.cff_fine(fused_mid, f_full)
        logits = self.head(fused_fine)
        full = F.interpolate(logits, size=x.shape[-2:], mode="bilinear", align_corners=False)
        return full, aux_quarter, aux_eighth


def enable_mc_dropout(model: nn.Module) -> None:
    """Keep dropout sampling active while the rest of the model stays in
    eval mode (the MC-dropout inference configuration)."""
    for mod in model.modules():
        if isinstance(mod, (nn.Dropout, nn.Dropout2d)):
            mod.train()


def save_model(path, model: Bicnet, width: int) -> None:
    torch.save({"width": width, "state": model.state_dict()}, path)


def load_model(path) -> Bicnet:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = Bicnet(width=int(payload["width"]))
    model.load_state_dict(payload["state"])
    model.eval()
    return model
