"""Predictive entropy over stochastic forward-pass stacks and thresholding.

The per-pixel prediction is the mean of the class probabilities over the T
passes; entropy (natural log) of that mean is the uncertainty measure. Pixels
whose entropy exceeds a global threshold are screened: forced to a distinct
"screened unsafe" code so metrics can fold them into false unsafe while
dropping them from the accuracy/mIoU population.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import StructuralError
from .io_utils import load_json, load_npy, save_json, save_npy

CLASS_ORDER = ("unsafe", "safe")
SCREENED = 2  # label code for entropy above threshold (see hazard codes 0/1/255)

_PROB_SUM_TOL = 1e-5


@dataclass
class PredictionStack:
    """T stochastic softmax passes for one image: (T, H, W, 2), classes
    ordered (unsafe, safe)."""

    probs: np.ndarray
    image_id: str

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 4 or self.probs.shape[3] != len(CLASS_ORDER):
            raise StructuralError("prediction stack must have shape (T, H, W, 2)")
        if self.probs.shape[0] < 1:
            raise StructuralError("prediction stack needs at least one pass")
        if np.any(self.probs < -1e-12):
            raise StructuralError("probabilities must be non-negative")
        sums = self.probs.sum(axis=3)
        if np.any(np.abs(sums - 1.0) > _PROB_SUM_TOL):
            raise StructuralError("per-pass probabilities must sum to 1")

    @property
    def passes(self) -> int:
        return self.probs.shape[0]


@dataclass
class UncertaintyMap:
    entropy: np.ndarray        # (H, W) nats
    mean_probs: np.ndarray     # (H, W, 2)
    argmax_labels: np.ndarray  # (H, W) uint8 {0, 1}
    valid: np.ndarray          # (H, W) bool; carries truth validity when known
    image_id: str = ""


@dataclass(frozen=True)
class UncertaintyThreshold:
    value: float  # nats
    provenance: str = ""

    def __post_init__(self):
        hi = np.log(len(CLASS_ORDER))
        if not (0.0 <= self.value <= hi + 1e-12):
            raise StructuralError(f"threshold must lie in [0, ln {len(CLASS_ORDER)}]")


def predictive_entropy(stack: PredictionStack, valid=None) -> UncertaintyMap:
    """Mean probabilities, their entropy in nats, and argmax labels.

    Ties in the argmax resolve to unsafe (conservative for landing);
    0 * log 0 is taken as 0.
    """
    mean = stack.probs.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(mean > 0.0, np.log(mean), 0.0)
    entropy = -(mean * logs).sum(axis=2)
    labels = (mean[:, :, 1] > mean[:, :, 0]).astype(np.uint8)
    if valid is None:
        valid = np.ones(entropy.shape, dtype=bool)
    return UncertaintyMap(
        entropy=entropy,
        mean_probs=mean,
        argmax_labels=labels,
        valid=np.asarray(valid, dtype=bool),
        image_id=stack.image_id,
    )


def compute_threshold(
    training_maps, per_image: bool = False, provenance: str = ""
) -> UncertaintyThreshold:
    """Mean training entropy: pixel-weighted by default, or a mean of
    per-image means with ``per_image=True``."""
    maps = list(training_maps)
    if not maps:
        raise StructuralError("cannot compute a threshold from zero maps")
    if per_image:
        means = []
        for m in maps:
            e = m.entropy[m.valid]
            if e.size:
                means.append(float(e.mean()))
        if not means:
            raise StructuralError("no valid pixels in any training map")
        value = float(np.mean(means))
        how = "image-weighted"
    else:
        total = 0.0
        count = 0
        for m in maps:
            e = m.entropy[m.valid]
            total += float(e.sum())
            count += e.size
        if count == 0:
            raise StructuralError("no valid pixels in any training map")
        value = total / count
        how = "pixel-weighted"
    return UncertaintyThreshold(
        value=value,
        provenance=provenance or f"{how} mean entropy over {len(maps)} training maps",
    )


@dataclass
class ScreenedLabels:
    labels: np.ndarray  # (H, W) uint8 {0, 1, SCREENED, 255}
    screening_rate: float
    mean_entropy: float
    threshold: float
    image_id: str = ""


def apply_threshold(umap: UncertaintyMap, thr: UncertaintyThreshold) -> ScreenedLabels:
    """Screen pixels with entropy above the threshold.

    Screened pixels get the SCREENED code; the rest keep their argmax labels.
    The screening rate is screened pixels over valid pixels.
    """
    labels = np.where(umap.valid, umap.argmax_labels, np.uint8(255)).astype(np.uint8)
    screened = umap.valid & (umap.entropy > thr.value)
    labels[screened] = SCREENED
    n_valid = int(umap.valid.sum())
    rate = float(screened.sum() / n_valid) if n_valid else 0.0
    mean_entropy = float(umap.entropy[umap.valid].mean()) if n_valid else float("nan")
    return ScreenedLabels(
        labels=labels,
        screening_rate=rate,
        mean_entropy=mean_entropy,
        threshold=thr.value,
        image_id=umap.image_id,
    )


def save_stack(prefix: str | Path, stack: PredictionStack) -> None:
    """Write <prefix>_stack.npy (float32 T,H,W,2) and <prefix>_stack.json."""
    prefix = Path(prefix)
    save_npy(prefix.parent / f"{prefix.name}_stack.npy", stack.probs.astype(np.float32))
    save_json(
        prefix.parent / f"{prefix.name}_stack.json",
        {
            "image_id": stack.image_id,
            "passes": stack.passes,
            "class_order": list(CLASS_ORDER),
        },
    )


def load_stack(prefix: str | Path) -> PredictionStack:
    prefix = Path(prefix)
    probs = load_npy(prefix.parent / f"{prefix.name}_stack.npy", dtype=np.float32, ndim=4)
    meta = load_json(prefix.parent / f"{prefix.name}_stack.json")
    if tuple(meta["class_order"]) != CLASS_ORDER:
        raise StructuralError(
            f"unexpected class order {meta['class_order']!r}; expected {list(CLASS_ORDER)}"
        )
    if int(meta["passes"]) != probs.shape[0]:
        raise StructuralError("sidecar pass count disagrees with the stack shape")
    return PredictionStack(probs=probs.astype(np.float64), image_id=str(meta["image_id"]))
