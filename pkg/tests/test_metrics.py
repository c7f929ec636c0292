import numpy as np
import pytest

from hazmap.camera import ImageMeta
from hazmap.errors import StructuralError
from hazmap.metrics import (
    ConfusionCounts,
    MetricsReport,
    accumulate,
    bin_report,
    binned_csv,
    compute_metrics,
)
from oracles import group_rows_by_bin

# prediction codes: 0 unsafe, 1 safe, 2 screened, 255 invalid
# truth codes: 0 unsafe, 1 safe, 255 invalid


def test_exhaustive_4x4_hand_table():
    pred = np.array(
        [
            [1, 1, 0, 0],
            [2, 2, 255, 255],
            [1, 0, 2, 255],
            [1, 0, 2, 1],
        ],
        dtype=np.uint8,
    )
    truth = np.array(
        [
            [1, 0, 1, 0],
            [1, 0, 1, 0],
            [255, 255, 255, 255],
            [1, 1, 0, 0],
        ],
        dtype=np.uint8,
    )
    c = accumulate(pred, truth, with_uncertainty=True)
    # hand enumeration over the 12 pixels with both sides defined:
    # row0: TS, FS, FU(plain), TU
    # row1: screened_safe, screened_unsafe, (2 invalid)
    # row2: all truth-invalid
    # row3: TS, FU(plain), screened_unsafe, FS
    assert c.true_safe == 2
    assert c.false_safe == 2
    assert c.true_unsafe == 1
    assert c.screened_safe == 1
    assert c.screened_unsafe == 2
    assert c.false_unsafe == 2 + 1  # two plain + one screened-safe
    assert c.valid_pixels == 7

    m = compute_metrics(c)
    assert m.precision == pytest.approx(2 / 4)
    assert m.sensitivity == pytest.approx(2 / 5)
    assert m.accuracy == pytest.approx(3 / 7)
    assert m.miou == pytest.approx(0.5 * (2 / 6 + 1 / 5))
    assert m.screening_rate == pytest.approx(3 / 10)


def test_without_uncertainty_folds_screened_into_unsafe():
    pred = np.array([[2, 2, 1]], dtype=np.uint8)
    truth = np.array([[1, 0, 1]], dtype=np.uint8)
    c = accumulate(pred, truth, with_uncertainty=False)
    assert c.screened_safe == 0 and c.screened_unsafe == 0
    assert c.false_unsafe == 1 and c.true_unsafe == 1 and c.true_safe == 1
    assert c.valid_pixels == 3


def test_perfect_prediction():
    truth = np.array([[1, 0], [0, 1]], dtype=np.uint8)
    c = accumulate(truth.copy(), truth)
    assert c.false_safe == 0 and c.false_unsafe == 0
    m = compute_metrics(c)
    assert (m.precision, m.sensitivity, m.accuracy, m.miou) == (1.0, 1.0, 1.0, 1.0)


def test_everything_screened():
    pred = np.full((3, 3), 2, dtype=np.uint8)
    truth = np.zeros((3, 3), dtype=np.uint8)
    truth[0] = 1
    c = accumulate(pred, truth, with_uncertainty=True)
    assert c.valid_pixels == 0
    m = compute_metrics(c)
    assert m.accuracy is None and m.miou is None  # undefined, not faked
    assert m.sensitivity == 0.0  # screened-safe pixels are false unsafe
    assert m.screening_rate == 1.0


def test_all_safe_prediction_half_true():
    n = 10
    pred = np.ones((1, n), dtype=np.uint8)
    truth = np.array([[1] * (n // 2) + [0] * (n // 2)], dtype=np.uint8)
    m = compute_metrics(accumulate(pred, truth))
    assert m.precision == pytest.approx(0.5)
    assert m.sensitivity == pytest.approx(1.0)
    assert m.accuracy == pytest.approx(0.5)
    assert m.miou == pytest.approx(0.25)  # 1/2 (5/10 + 0/5)


def test_precision_undefined_without_safe_predictions():
    pred = np.zeros((2, 2), dtype=np.uint8)
    truth = np.ones((2, 2), dtype=np.uint8)
    m = compute_metrics(accumulate(pred, truth))
    assert m.precision is None
    assert m.sensitivity == 0.0


def test_accuracy_identity():
    rng = np.random.default_rng(4)
    pred = rng.integers(0, 2, size=(40, 40)).astype(np.uint8)
    truth = rng.integers(0, 2, size=(40, 40)).astype(np.uint8)
    c = accumulate(pred, truth)
    m = compute_metrics(c)
    assert m.accuracy * c.valid_pixels == pytest.approx(c.true_safe + c.true_unsafe)


def test_miou_one_iff_accuracy_one_with_both_classes():
    truth = np.array([[1, 0, 1, 0]], dtype=np.uint8)
    perfect = compute_metrics(accumulate(truth.copy(), truth))
    assert perfect.accuracy == 1.0 and perfect.miou == 1.0
    wrong = np.array([[1, 1, 1, 0]], dtype=np.uint8)
    m = compute_metrics(accumulate(wrong, truth))
    assert m.accuracy < 1.0 and m.miou < 1.0


def test_shadow_exclusion():
    pred = np.array([[1, 1, 0, 0]], dtype=np.uint8)
    truth = np.array([[1, 0, 0, 1]], dtype=np.uint8)
    shadow = np.array([[0, 1, 0, 1]], dtype=np.uint8)
    c_all = accumulate(pred, truth, shadow, ignore_shadows=False)
    c_lit = accumulate(pred, truth, shadow, ignore_shadows=True)
    assert c_all.valid_pixels == 4
    assert c_lit.valid_pixels == 2
    assert c_lit.true_safe == 1 and c_lit.true_unsafe == 1
    with pytest.raises(StructuralError):
        accumulate(pred, truth, None, ignore_shadows=True)


def test_screening_only_removes_safe_predictions():
    # with-uncertainty safe-predicted set must be a subset of without
    rng = np.random.default_rng(5)
    argmax = rng.integers(0, 2, size=(30, 30)).astype(np.uint8)
    screened_mask = rng.uniform(size=(30, 30)) < 0.3
    pred_with = np.where(screened_mask, np.uint8(2), argmax).astype(np.uint8)
    truth = rng.integers(0, 2, size=(30, 30)).astype(np.uint8)
    c_without = accumulate(argmax, truth, with_uncertainty=False)
    c_with = accumulate(pred_with, truth, with_uncertainty=True)
    assert (c_with.true_safe + c_with.false_safe) <= (
        c_without.true_safe + c_without.false_safe
    )
    m_without = compute_metrics(c_without)
    m_with = compute_metrics(c_with)
    assert m_with.sensitivity <= m_without.sensitivity + 1e-15


def test_counts_merge_matches_pooled():
    rng = np.random.default_rng(6)
    parts = []
    preds, truths = [], []
    for _ in range(5):
        pred = rng.integers(0, 2, size=(10, 10)).astype(np.uint8)
        truth = rng.integers(0, 2, size=(10, 10)).astype(np.uint8)
        preds.append(pred)
        truths.append(truth)
        parts.append(accumulate(pred, truth))
    total = ConfusionCounts()
    for p in parts:
        total = total + p
    pooled = accumulate(
        np.concatenate([p.ravel() for p in preds]).reshape(1, -1),
        np.concatenate([t.ravel() for t in truths]).reshape(1, -1),
    )
    assert total == pooled


def test_shape_mismatch_rejected():
    with pytest.raises(StructuralError):
        accumulate(np.zeros((2, 2), dtype=np.uint8), np.zeros((3, 3), dtype=np.uint8))


def _row(image_id, gsd, precision=0.5, accuracy=0.5):
    counts = ConfusionCounts(true_safe=1, false_safe=1, true_unsafe=1,
                             false_unsafe=1, valid_pixels=4)
    m = compute_metrics(counts, image_id=image_id,
                        meta=ImageMeta(gsd=gsd, imaging_depth=1.0,
                                       viewing_angle=10.0, visibility_ratio=0.9),
                        mean_entropy=gsd * 0.1)
    return m


def test_report_pooled_equals_sum_of_counts():
    rng = np.random.default_rng(7)
    rows = []
    total = ConfusionCounts()
    for k in range(4):
        pred = rng.integers(0, 2, size=(8, 8)).astype(np.uint8)
        truth = rng.integers(0, 2, size=(8, 8)).astype(np.uint8)
        c = accumulate(pred, truth)
        total = total + c
        rows.append(compute_metrics(c, image_id=f"img{k}"))
    report = MetricsReport.from_rows(rows)
    assert report.pooled.counts == total
    csv_text = report.to_csv()
    assert csv_text.count("\n") == 6  # header + 4 rows + pooled
    assert "__pooled__" in csv_text


def test_csv_serializes_undefined_as_empty():
    counts = ConfusionCounts(true_unsafe=4, valid_pixels=4)
    report = MetricsReport.from_rows([compute_metrics(counts, image_id="a")])
    lines = report.to_csv().splitlines()
    row = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert row["precision"] == ""
    assert row["sensitivity"] == ""
    assert row["accuracy"] == "1.0"


def test_binning_single_and_mean():
    rows = [_row("a", 0.1), _row("b", 0.3), _row("c", 0.32)]
    table = bin_report(rows, "gsd", [0.0, 0.2, 0.4])
    assert table[0]["count"] == 1
    assert table[1]["count"] == 2
    assert table[1]["mean_entropy"] == pytest.approx((0.03 + 0.032) / 2)
    text = binned_csv(table)
    assert text.splitlines()[0].startswith("axis,bin_lo,bin_hi,count")


def test_empty_bin_emitted_with_marker():
    rows = [_row("a", 0.1)]
    table = bin_report(rows, "gsd", [0.0, 0.05, 0.2])
    assert table[0]["count"] == 0
    assert table[0]["precision"] is None
    text = binned_csv(table)
    assert ",0," in text.splitlines()[1]


def test_binning_matches_naive_grouping():
    rng = np.random.default_rng(8)
    gsds = rng.uniform(0.0, 1.0, 25)
    rows = [_row(f"i{k}", g) for k, g in enumerate(gsds)]
    edges = [0.0, 0.25, 0.5, 0.75, 1.0]
    table = bin_report(rows, "gsd", edges)
    groups = group_rows_by_bin(gsds, edges)
    for entry, members in zip(table, groups):
        assert entry["count"] == len(members)
        if members:
            expected = float(np.mean([rows[i].accuracy for i in members]))
            assert entry["accuracy"] == pytest.approx(expected)


def test_bad_bin_arguments():
    with pytest.raises(StructuralError):
        bin_report([], "depth", [0, 1])
    with pytest.raises(StructuralError):
        bin_report([], "gsd", [1.0])
    with pytest.raises(StructuralError):
        bin_report([], "gsd", [1.0, 0.5])
