"""MC-dropout inference producing toolkit-compatible prediction stacks.

A stack is NPY v1.0 float32 (T, H, W, 2) of per-pass softmax probabilities
plus a JSON sidecar {image_id, passes, class_order ["unsafe", "safe"]},
exactly the contract the evaluation toolkit ingests.
"""

from __future__ import annotations

import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np
import numpy.lib.format
import torch
import torch.nn.functional as F

from .model import Bicnet, enable_mc_dropout

CLASS_ORDER = ["unsafe", "safe"]


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def mc_forward(model: Bicnet, image: np.ndarray, passes: int, seed: int = 0) -> np.ndarray:
    """T stochastic softmax passes over one image; returns (T, H, W, 2)."""
    if passes < 1:
        raise ValueError("passes must be >= 1")
    model.eval()
    enable_mc_dropout(model)
    torch.manual_seed(seed)
    x = torch.from_numpy(image.astype(np.float32))[None, None]
    outs = []
    with torch.no_grad():
        for _ in range(passes):
            logits, _, _ = model(x)
            outs.append(F.softmax(logits, dim=1)[0].permute(1, 2, 0).numpy())
    return np.stack(outs).astype(np.float32)


def write_stack(prefix: str | Path, probs: np.ndarray, image_id: str) -> None:
    """Write <prefix>_stack.npy and <prefix>_stack.json; refuses bad shapes."""
    probs = np.ascontiguousarray(probs, dtype=np.float32)
    if probs.ndim != 4 or probs.shape[3] != 2:
        raise ValueError("stack must have shape (T, H, W, 2)")
    prefix = Path(prefix)
    buf = io.BytesIO()
    numpy.lib.format.write_array(buf, probs, version=(1, 0))
    _atomic_write(prefix.parent / f"{prefix.name}_stack.npy", buf.getvalue())
    sidecar = {
        "class_order": CLASS_ORDER,
        "image_id": image_id,
        "passes": int(probs.shape[0]),
    }
    _atomic_write(
        prefix.parent / f"{prefix.name}_stack.json",
        (json.dumps(sidecar, sort_keys=True, indent=2) + "\n").encode(),
    )


def infer_directory(
    model: Bicnet,
    images_dir: str | Path,
    out_dir: str | Path,
    passes: int = 8,
    seed: int = 0,
    batch_size: int = 16,
) -> list[str]:
    """Run MC inference over every *_image.npy and write stacks; returns ids.

    Images are processed in batches (dropout draws are independent per
    sample, so batching only amortizes overhead).
    """
    images_dir = Path(images_dir)
    out_dir = Path(out_dir)
    paths = sorted(images_dir.glob("*_image.npy"))
    if not paths:
        raise ValueError(f"no *_image.npy files under {images_dir}")
    model.eval()
    enable_mc_dropout(model)
    torch.manual_seed(seed)
    names = []
    for start in range(0, len(paths), batch_size):
        chunk = paths[start : start + batch_size]
        images = np.stack([np.load(p).astype(np.float32) for p in chunk])
        x = torch.from_numpy(images)[:, None]
        outs = []
        with torch.no_grad():
            for _ in range(passes):
                logits, _, _ = model(x)
                outs.append(F.softmax(logits, dim=1).permute(0, 2, 3, 1).numpy())
        stacks = np.stack(outs, axis=1).astype(np.float32)  # (B, T, H, W, 2)
        for k, p in enumerate(chunk):
            name = p.name[: -len("_image.npy")]
            write_stack(out_dir / name, stacks[k], image_id=name)
            names.append(name)
    return names
