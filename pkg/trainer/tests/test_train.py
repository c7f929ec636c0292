import numpy as np
import pytest
import torch

from bicnet_trainer.data import IGNORE_INDEX, SafetyImageDataset
from bicnet_trainer.model import Bicnet
from bicnet_trainer.train import TrainConfig, masked_cross_entropy, multiscale_loss, train


def test_dataset_loading(fake_dataset):
    ds = SafetyImageDataset(fake_dataset)
    assert len(ds) == 8
    image, labels, name = ds[0]
    assert image.shape == (1, 64, 64)
    assert labels.shape == (64, 64)
    assert name == "e00"
    assert (labels[:2] == IGNORE_INDEX).all()


def test_dataset_shadow_masking(fake_dataset):
    plain = SafetyImageDataset(fake_dataset)
    masked = SafetyImageDataset(fake_dataset, mask_shadow=True)
    _, lab_plain, _ = plain[1]
    _, lab_masked, _ = masked[1]
    shadow = np.load(fake_dataset / "e01_shadow.npy")
    assert ((lab_masked == IGNORE_INDEX) | (lab_masked == lab_plain)).all()
    assert (lab_masked.numpy()[shadow != 0] == IGNORE_INDEX).all()


def test_empty_dataset_rejected(tmp_path):
    with pytest.raises(ValueError):
        SafetyImageDataset(tmp_path)


def test_masked_loss_ignores_logits_at_masked_pixels(fake_dataset):
    # predictions at invalid/shadow positions must never influence the loss
    torch.manual_seed(0)
    model = Bicnet(width=4)
    model.eval()
    ds = SafetyImageDataset(fake_dataset, mask_shadow=True)
    image, labels, _ = ds[0]
    labels = labels[None]
    mask = labels == IGNORE_INDEX
    assert mask.any()
    with torch.no_grad():
        outputs = [t.clone() for t in model(image[None])]
        base = multiscale_loss(outputs, labels)
        rng = torch.Generator().manual_seed(42)
        for logits in outputs:
            si = labels.shape[-2] // logits.shape[-2]
            sub = mask[:, ::si, ::si]
            noise = 100.0 * torch.randn(logits.shape, generator=rng)
            logits.permute(0, 2, 3, 1)[sub] = noise.permute(0, 2, 3, 1)[sub]
        again = multiscale_loss(outputs, labels)
    assert float(base) == float(again)


def test_all_masked_batch_raises(tmp_path):
    root = tmp_path / "data"
    root.mkdir()
    image = np.zeros((32, 32), dtype=np.float32)
    labels = np.full((32, 32), IGNORE_INDEX, dtype=np.uint8)
    np.save(root / "a_image.npy", image)
    np.save(root / "a_labels.npy", labels)
    with pytest.raises(ValueError, match="no labeled pixels"):
        train(root, None, TrainConfig(epochs=1, batch_size=1))


def test_masked_ce_subsamples_labels():
    torch.manual_seed(1)
    logits = torch.randn(1, 2, 8, 8)
    labels = torch.randint(0, 2, (1, 32, 32))
    loss = masked_cross_entropy(logits, labels)
    direct = torch.nn.functional.cross_entropy(logits, labels[:, ::4, ::4])
    assert torch.equal(loss, direct)


def test_training_reduces_loss_and_is_seeded(fake_dataset, tmp_path):
    cfg = TrainConfig(epochs=4, batch_size=4, seed=1, width=4)
    _, curve_a = train(fake_dataset, tmp_path / "a.pt", cfg, tmp_path / "curve.json")
    _, curve_b = train(fake_dataset, tmp_path / "b.pt", cfg)
    assert curve_a[-1] < curve_a[0]
    assert curve_a == curve_b  # same seed, same data, same curve
    assert (tmp_path / "curve.json").exists()
