"""Confusion accounting and the precision/sensitivity/accuracy/mIoU report.

Counting semantics:
  - truth-invalid pixels are always excluded; shadowed pixels additionally
    excluded in ignore-shadows mode;
  - in with-uncertainty mode, screened pixels leave the valid population
    (accuracy and mIoU are over confident pixels only), but screened
    truly-safe pixels still count as false unsafe for sensitivity;
  - undefined ratios (zero denominators) are reported as missing values,
    never as sentinel numbers.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import ImageMeta
from .errors import StructuralError
from .io_utils import atomic_write_bytes, save_json
from .uncertainty import SCREENED

_INVALID = 255


@dataclass
class ConfusionCounts:
    true_safe: int = 0
    false_safe: int = 0
    true_unsafe: int = 0
    false_unsafe: int = 0      # includes screened truly-safe pixels
    screened_safe: int = 0
    screened_unsafe: int = 0
    valid_pixels: int = 0      # unscreened pixels with defined truth

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.true_safe + other.true_safe,
            self.false_safe + other.false_safe,
            self.true_unsafe + other.true_unsafe,
            self.false_unsafe + other.false_unsafe,
            self.screened_safe + other.screened_safe,
            self.screened_unsafe + other.screened_unsafe,
            self.valid_pixels + other.valid_pixels,
        )

    def check(self) -> None:
        expected = (
            self.true_safe
            + self.false_safe
            + self.true_unsafe
            + (self.false_unsafe - self.screened_safe)
        )
        if expected != self.valid_pixels:
            raise StructuralError("confusion counts violate the valid-pixel identity")

    def to_dict(self) -> dict:
        return {
            "true_safe": self.true_safe,
            "false_safe": self.false_safe,
            "true_unsafe": self.true_unsafe,
            "false_unsafe": self.false_unsafe,
            "screened_safe": self.screened_safe,
            "screened_unsafe": self.screened_unsafe,
            "valid_pixels": self.valid_pixels,
        }


def accumulate(
    pred: np.ndarray,
    truth_labels: np.ndarray,
    truth_shadow: np.ndarray | None = None,
    with_uncertainty: bool = False,
    ignore_shadows: bool = False,
) -> ConfusionCounts:
    """Count one image. pred codes {0 unsafe, 1 safe, 2 screened, 255 invalid};
    truth codes {0, 1, 255}. Without uncertainty, screened predictions are
    treated as plain unsafe predictions."""
    pred = np.asarray(pred)
    truth_labels = np.asarray(truth_labels)
    if pred.shape != truth_labels.shape:
        raise StructuralError("prediction and truth shapes differ")
    if ignore_shadows and truth_shadow is None:
        raise StructuralError("ignore_shadows requires a truth shadow mask")

    mask = (truth_labels != _INVALID) & (pred != _INVALID)
    if ignore_shadows:
        if truth_shadow.shape != truth_labels.shape:
            raise StructuralError("shadow mask shape differs from labels")
        mask &= np.asarray(truth_shadow) == 0

    p = pred[mask]
    t = truth_labels[mask]
    screened = p == SCREENED
    if not with_uncertainty:
        p = np.where(screened, 0, p)
        screened = np.zeros_like(screened)

    pred_safe = p == 1
    pred_unsafe = p == 0
    truth_safe = t == 1
    truth_unsafe = t == 0

    ts = int(np.sum(pred_safe & truth_safe))
    fs = int(np.sum(pred_safe & truth_unsafe))
    tu = int(np.sum(pred_unsafe & truth_unsafe))
    fu_plain = int(np.sum(pred_unsafe & truth_safe))
    sc_safe = int(np.sum(screened & truth_safe))
    sc_unsafe = int(np.sum(screened & truth_unsafe))

    counts = ConfusionCounts(
        true_safe=ts,
        false_safe=fs,
        true_unsafe=tu,
        false_unsafe=fu_plain + sc_safe,
        screened_safe=sc_safe,
        screened_unsafe=sc_unsafe,
        valid_pixels=ts + fs + tu + fu_plain,
    )
    counts.check()
    return counts


@dataclass
class MetricsRow:
    image_id: str
    counts: ConfusionCounts
    precision: float | None
    sensitivity: float | None
    accuracy: float | None
    miou: float | None
    screening_rate: float | None
    with_uncertainty: bool
    ignore_shadows: bool
    meta: ImageMeta | None = None
    mean_entropy: float | None = None

    def to_dict(self) -> dict:
        d = {
            "image_id": self.image_id,
            "precision": self.precision,
            "sensitivity": self.sensitivity,
            "accuracy": self.accuracy,
            "miou": self.miou,
            "screening_rate": self.screening_rate,
            "with_uncertainty": self.with_uncertainty,
            "ignore_shadows": self.ignore_shadows,
            "mean_entropy": self.mean_entropy,
        }
        d.update(self.counts.to_dict())
        for key in ("gsd", "imaging_depth", "viewing_angle", "visibility_ratio"):
            d[key] = getattr(self.meta, key) if self.meta is not None else None
        return d


def compute_metrics(
    counts: ConfusionCounts,
    image_id: str = "",
    with_uncertainty: bool = False,
    ignore_shadows: bool = False,
    meta: ImageMeta | None = None,
    mean_entropy: float | None = None,
) -> MetricsRow:
    """Exact ratio evaluation; any zero denominator yields a missing value."""
    counts.check()
    ts = counts.true_safe
    fs = counts.false_safe
    tu = counts.true_unsafe
    fu = counts.false_unsafe
    valid = counts.valid_pixels
    screened = counts.screened_safe + counts.screened_unsafe

    precision = ts / (ts + fs) if (ts + fs) > 0 else None
    sensitivity = ts / (ts + fu) if (ts + fu) > 0 else None
    accuracy = (ts + tu) / valid if valid > 0 else None
    if valid > 0 and (valid - tu) > 0 and (valid - ts) > 0:
        miou = 0.5 * (ts / (valid - tu) + tu / (valid - ts))
    else:
        miou = None
    denom = valid + screened
    screening_rate = screened / denom if denom > 0 else None

    return MetricsRow(
        image_id=image_id,
        counts=counts,
        precision=precision,
        sensitivity=sensitivity,
        accuracy=accuracy,
        miou=miou,
        screening_rate=screening_rate,
        with_uncertainty=with_uncertainty,
        ignore_shadows=ignore_shadows,
        meta=meta,
        mean_entropy=mean_entropy,
    )


_CSV_COLUMNS = [
    "image_id",
    "precision",
    "sensitivity",
    "accuracy",
    "miou",
    "screening_rate",
    "true_safe",
    "false_safe",
    "true_unsafe",
    "false_unsafe",
    "screened_safe",
    "screened_unsafe",
    "valid_pixels",
    "with_uncertainty",
    "ignore_shadows",
    "mean_entropy",
    "gsd",
    "imaging_depth",
    "viewing_angle",
    "visibility_ratio",
]


@dataclass
class MetricsReport:
    """Per-image rows plus one row pooled from the summed counts."""

    rows: list
    pooled: MetricsRow

    @classmethod
    def from_rows(cls, rows: list) -> "MetricsReport":
        if not rows:
            raise StructuralError("report needs at least one image row")
        total = ConfusionCounts()
        for r in rows:
            total = total + r.counts
        entropies = [r.mean_entropy for r in rows if r.mean_entropy is not None]
        pooled = compute_metrics(
            total,
            image_id="__pooled__",
            with_uncertainty=rows[0].with_uncertainty,
            ignore_shadows=rows[0].ignore_shadows,
            mean_entropy=float(np.mean(entropies)) if entropies else None,
        )
        return cls(rows=list(rows), pooled=pooled)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=_CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in [*self.rows, self.pooled]:
            d = r.to_dict()
            writer.writerow({k: ("" if d.get(k) is None else d.get(k)) for k in _CSV_COLUMNS})
        return buf.getvalue()

    def save(self, prefix: str | Path) -> None:
        """Write <prefix>_report.csv and <prefix>_report.json."""
        prefix = Path(prefix)
        atomic_write_bytes(
            prefix.parent / f"{prefix.name}_report.csv", self.to_csv().encode("utf-8")
        )
        save_json(
            prefix.parent / f"{prefix.name}_report.json",
            {
                "rows": [r.to_dict() for r in self.rows],
                "pooled": self.pooled.to_dict(),
            },
        )


_BIN_AXES = ("gsd", "viewing_angle", "visibility_ratio")
_BIN_METRICS = ("precision", "sensitivity", "accuracy", "miou", "screening_rate", "mean_entropy")


def bin_report(rows: list, axis: str, edges) -> list[dict]:
    """Mean metrics per bin of an ImageMeta axis (right-exclusive bins, last
    bin right-inclusive). Rows without metadata are skipped; empty bins are
    emitted with count 0 and missing means."""
    if axis not in _BIN_AXES:
        raise StructuralError(f"axis must be one of {_BIN_AXES}")
    edges = [float(e) for e in edges]
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise StructuralError("bin edges must be increasing with at least 2 values")

    table = []
    for k in range(len(edges) - 1):
        lo, hi = edges[k], edges[k + 1]
        last = k == len(edges) - 2
        members = []
        for r in rows:
            if r.meta is None:
                continue
            v = getattr(r.meta, axis)
            if (lo <= v < hi) or (last and v == hi):
                members.append(r)
        entry = {"axis": axis, "bin_lo": lo, "bin_hi": hi, "count": len(members)}
        for name in _BIN_METRICS:
            vals = [getattr(r, name) for r in members if getattr(r, name) is not None]
            entry[name] = float(np.mean(vals)) if vals else None
        table.append(entry)
    return table


def binned_csv(table: list[dict]) -> str:
    cols = ["axis", "bin_lo", "bin_hi", "count", *_BIN_METRICS]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    for entry in table:
        writer.writerow({k: ("" if entry.get(k) is None else entry.get(k)) for k in cols})
    return buf.getvalue()
