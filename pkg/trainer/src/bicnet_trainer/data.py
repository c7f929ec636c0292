"""Dataset over the toolkit's image/label artifacts.

An example is the triple <prefix>_image.npy (float32 render in [0, 1]),
<prefix>_labels.npy (uint8 {0 unsafe, 1 safe, 255 invalid}) and, when
present, <prefix>_shadow.npy (uint8 {0 lit, 1 shadow}). Invalid pixels are
remapped to the ignore index; shadowed pixels too when mask_shadow is set.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch.utils.data import Dataset

IGNORE_INDEX = 255


def list_examples(data_dir: str | Path) -> list[tuple[str, Path]]:
    data_dir = Path(data_dir)
    pairs = []
    for img in sorted(data_dir.glob("*_image.npy")):
        name = img.name[: -len("_image.npy")]
        if (data_dir / f"{name}_labels.npy").exists():
            pairs.append((name, data_dir))
    return pairs


class SafetyImageDataset(Dataset):
    def __init__(self, data_dir: str | Path, mask_shadow: bool = False):
        self.examples = list_examples(data_dir)
        if not self.examples:
            raise ValueError(f"no *_image.npy / *_labels.npy pairs under {data_dir}")
        self.mask_shadow = mask_shadow

    def __len__(self) -> int:
        return len(self.examples)

    def __getitem__(self, idx: int):
        name, root = self.examples[idx]
        image = np.load(root / f"{name}_image.npy").astype(np.float32)
        labels = np.load(root / f"{name}_labels.npy").astype(np.int64)
        if self.mask_shadow:
            shadow_path = root / f"{name}_shadow.npy"
            if shadow_path.exists():
                labels = np.where(np.load(shadow_path) != 0, IGNORE_INDEX, labels)
        return (
            torch.from_numpy(image)[None],  # (1, H, W)
            torch.from_numpy(labels),       # (H, W)
            name,
        )
