"""Dataset generation by driving the labeling toolkit's CLI.

The trainer consumes the toolkit only through its command line and file
formats: each scene is produced by one ``hazmap e2e`` run and the per-image
artifacts are collected into a flat directory with scene-prefixed names.
"""

from __future__ import annotations

import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

# two scene families with distinct texture statistics; held-out scenes are
# drawn from a family never used in training
FAMILIES = {
    "train": {
        "fractal_amplitude": 0.025,
        "boulder_count": 25,
        "boulder_size_range": [0.12, 0.45],
        "sun_direction": [1.0, 0.4, 0.2],
    },
    "heldout": {
        "fractal_amplitude": 0.035,
        "boulder_count": 35,
        "boulder_size_range": [0.15, 0.5],
        "sun_direction": [0.8, 0.8, 0.3],
    },
}


def scene_config(seed: int, family: str, views: int, image_size: int) -> dict:
    return {
        "schema_version": 1,
        "scene": {
            "seed": seed,
            "base_radius": 2.0,
            "subdivisions": 5,
            **FAMILIES[family],
        },
        "site_direction": [1.0, 0.0, 0.0],
        "dem": {"cell_size": 0.05, "width": 56, "height": 56},
        "cameras": {
            "count": views,
            "distance": 3.2,
            "cone_deg": 12.0,
            "fx": 160.0,
            "width": image_size,
            "height": image_size,
        },
    }


def generate_dataset(
    out_dir: str | Path,
    family: str,
    scene_seeds,
    views_per_scene: int,
    image_size: int = 96,
    threads: int = 2,
) -> int:
    """Run one e2e pipeline per scene and collect a flat image/label set.

    Returns the number of images written. Raises on any toolkit failure.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_images = 0
    for seed in scene_seeds:
        with tempfile.TemporaryDirectory() as td:
            td = Path(td)
            cfg_path = td / "config.json"
            cfg_path.write_text(json.dumps(scene_config(seed, family, views_per_scene, image_size)))
            proc = subprocess.run(
                [
                    sys.executable, "-m", "hazmap.cli",
                    "--threads", str(threads),
                    "e2e", "--config", str(cfg_path), "--out", str(td / "run"),
                ],
                capture_output=True,
                text=True,
            )
            if proc.returncode != 0:
                raise RuntimeError(
                    f"toolkit e2e failed for scene {seed} (rc {proc.returncode}): {proc.stderr}"
                )
            for img in sorted((td / "run").glob("img*_image.npy")):
                name = img.name[: -len("_image.npy")]
                for suffix in ("_image.npy", "_labels.npy", "_shadow.npy", "_meta.json"):
                    src = td / "run" / f"{name}{suffix}"
                    if src.exists():
                        shutil.copy(src, out_dir / f"s{seed:03d}_{name}{suffix}")
                n_images += 1
    if n_images == 0:
        raise RuntimeError("no images were produced")
    return n_images
