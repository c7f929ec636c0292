import numpy as np
import pytest


def synthetic_example(seed: int, h: int = 64, w: int = 64):
    """Fabricated image/label pair with learnable structure: bright blobs are
    unsafe, background brightness follows a smooth ramp."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w]
    image = 0.4 + 0.2 * (xx / w) + 0.02 * rng.standard_normal((h, w))
    labels = np.ones((h, w), dtype=np.uint8)
    for _ in range(6):
        cy, cx = rng.integers(8, h - 8), rng.integers(8, w - 8)
        r = rng.integers(3, 7)
        d2 = (yy - cy) ** 2 + (xx - cx) ** 2
        image = np.where(d2 < r * r, 0.95, image)
        labels = np.where(d2 < (r + 2) ** 2, 0, labels).astype(np.uint8)
    labels[:2] = 255  # invalid strip
    shadow = (image < 0.35).astype(np.uint8)
    return image.astype(np.float32), labels, shadow


@pytest.fixture
def fake_dataset(tmp_path):
    root = tmp_path / "data"
    root.mkdir()
    for k in range(8):
        image, labels, shadow = synthetic_example(k)
        np.save(root / f"e{k:02d}_image.npy", image)
        np.save(root / f"e{k:02d}_labels.npy", labels)
        np.save(root / f"e{k:02d}_shadow.npy", shadow)
    return root
