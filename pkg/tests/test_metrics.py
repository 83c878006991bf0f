from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fruitsize import (
    InvalidArgumentError,
    MaskRegion,
    MatchCounts,
    ScoredDetection,
    SizeSeries,
    UndefinedStatisticError,
    average_precision,
    mae,
    map_over_thresholds,
    mape,
    mask_iou,
    match_instances,
    precision_recall_f1,
    r_squared,
    rmse,
)

series = st.lists(
    st.tuples(st.floats(1.0, 1000.0), st.floats(-1000.0, 1000.0)),
    min_size=1, max_size=30,
).map(lambda pairs: SizeSeries(np.array([p[0] for p in pairs]),
                               np.array([p[1] for p in pairs])))


def rect_mask(w, h, rows=None, cols=None):
    bitmap = np.zeros((h, w), bool)
    bitmap[slice(*rows) if rows else slice(None),
           slice(*cols) if cols else slice(None)] = True
    return MaskRegion(width=w, height=h, bitmap=bitmap)


# ------------------------------------------------------------ size errors

def test_rmse_identity_and_offset():
    assert rmse(SizeSeries([1, 2, 3], [1, 2, 3])) == 0.0
    assert rmse(SizeSeries([1, 3], [2, 4])) == 1.0


def test_rmse_matches_exact_arithmetic_oracle():
    rng = np.random.default_rng(0)
    a = rng.uniform(5, 100, 40)
    p = a + rng.normal(0, 3, 40)
    exact = (sum((Fraction(x) - Fraction(y)) ** 2
                 for x, y in zip(p, a)) / 40) ** Fraction(1)
    assert rmse(SizeSeries(a, p)) == pytest.approx(float(exact) ** 0.5,
                                                   abs=1e-12)


def test_mae_basics():
    assert mae(SizeSeries([10], [13])) == 3.0
    assert mae(SizeSeries([1, 2], [1, 2])) == 0.0


def test_mae_oracle():
    rng = np.random.default_rng(1)
    a = rng.uniform(5, 100, 25)
    p = a + rng.normal(0, 2, 25)
    exact = sum(abs(Fraction(y) - Fraction(x)) for x, y in zip(p, a)) / 25
    assert mae(SizeSeries(a, p)) == pytest.approx(float(exact), abs=1e-12)


def test_mape_percent():
    assert mape(SizeSeries([100.0], [90.0])) == pytest.approx(10.0, abs=1e-12)
    assert mape(SizeSeries([3, 7], [3, 7])) == 0.0


def test_mape_rejects_nonpositive_actual():
    with pytest.raises(InvalidArgumentError):
        mape(SizeSeries([0.0, 1.0], [1.0, 1.0]))


def test_mape_scale_invariant():
    rng = np.random.default_rng(2)
    a = rng.uniform(10, 50, 20)
    p = a * rng.uniform(0.8, 1.2, 20)
    for s in (0.25, 3.0, 117.0):
        assert mape(SizeSeries(a * s, p * s)) == \
            pytest.approx(mape(SizeSeries(a, p)), rel=1e-12)


def test_r_squared_trivials():
    assert r_squared(SizeSeries([1, 2, 3], [1, 2, 3])) == 1.0
    assert r_squared(SizeSeries([1, 2, 3], [2, 2, 2])) == 0.0
    assert r_squared(SizeSeries([1, 2, 3], [1, 2, 4])) == pytest.approx(0.5)


def test_r_squared_zero_variance():
    with pytest.raises(UndefinedStatisticError):
        r_squared(SizeSeries([5, 5, 5], [4, 5, 6]))


def test_series_validation():
    with pytest.raises(InvalidArgumentError):
        SizeSeries([1, 2], [1])
    with pytest.raises(InvalidArgumentError):
        SizeSeries([], [])
    with pytest.raises(InvalidArgumentError):
        SizeSeries([np.nan], [1.0])


@settings(max_examples=200, deadline=None)
@given(series)
def test_mae_never_exceeds_rmse(s):
    assert mae(s) <= rmse(s) + 1e-12


@settings(max_examples=100, deadline=None)
@given(series)
def test_r_squared_at_most_one(s):
    try:
        assert r_squared(s) <= 1.0
    except UndefinedStatisticError:
        pass


# ------------------------------------------------------------ masks

def test_iou_identical_and_disjoint():
    a = rect_mask(10, 10, rows=(0, 5))
    b = rect_mask(10, 10, rows=(5, 10))
    assert mask_iou(a, a) == 1.0
    assert mask_iou(a, b) == 0.0


def test_iou_counted_example():
    a = rect_mask(15, 10, rows=(0, 10))   # rows 0..9 of a 10-row grid
    b = rect_mask(15, 10, rows=(5, 10))
    # intersection 5*15, union 10*15 -> wait: a covers all rows
    assert mask_iou(a, b) == pytest.approx((5 * 15) / (10 * 15))


def test_iou_thirds_example():
    # 10x15 grid: A rows 0-9 of 15, B rows 5-14 -> 50/150 = 1/3
    a = rect_mask(10, 15, rows=(0, 10))
    b = rect_mask(10, 15, rows=(5, 15))
    assert mask_iou(a, b) == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_iou_empty_masks_zero():
    e = rect_mask(4, 4, rows=(0, 0))
    assert mask_iou(e, e) == 0.0


def test_iou_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        mask_iou(rect_mask(4, 4), rect_mask(5, 4))


def test_iou_symmetry():
    rng = np.random.default_rng(3)
    a = MaskRegion(8, 8, rng.uniform(size=(8, 8)) > 0.5)
    b = MaskRegion(8, 8, rng.uniform(size=(8, 8)) > 0.5)
    assert mask_iou(a, b) == mask_iou(b, a)


# ------------------------------------------------------------ matching

def det(mask, conf, image_id=""):
    return ScoredDetection(mask=mask, confidence=conf, image_id=image_id)


def test_match_exact_prediction():
    gt = rect_mask(8, 8, rows=(0, 4))
    counts, pairs = match_instances([det(gt, 0.9)], [gt], 0.5)
    assert (counts.tp, counts.fp, counts.fn) == (1, 0, 0)
    assert pairs == [(0, 0)]


def test_match_no_ground_truth():
    counts, pairs = match_instances([det(rect_mask(8, 8), 0.9)], [], 0.5)
    assert (counts.tp, counts.fp, counts.fn) == (0, 1, 0)
    assert pairs == []


def test_match_two_predictions_one_gt():
    gt = rect_mask(8, 8, rows=(0, 4))
    near = rect_mask(8, 8, rows=(0, 5))
    counts, pairs = match_instances(
        [det(near, 0.4), det(gt, 0.8)], [gt], 0.5)
    assert (counts.tp, counts.fp, counts.fn) == (1, 1, 0)
    assert pairs == [(1, 0)]  # the higher-confidence prediction matched


def test_prf_direct_substitution():
    p, r, f1 = precision_recall_f1(MatchCounts(tp=9, fp=1, fn=1))
    assert (p, r) == (0.9, 0.9)
    assert f1 == pytest.approx(0.9, abs=1e-12)


def test_prf_zero_convention():
    assert precision_recall_f1(MatchCounts(0, 0, 0)) == (0.0, 0.0, 0.0)


def test_prf_oracle_random_counts():
    rng = np.random.default_rng(4)
    for _ in range(50):
        tp, fp, fn = (int(v) for v in rng.integers(0, 20, 3))
        p, r, f1 = precision_recall_f1(MatchCounts(tp, fp, fn))
        ep = tp / (tp + fp) if tp + fp else 0.0
        er = tp / (tp + fn) if tp + fn else 0.0
        ef = 2 * ep * er / (ep + er) if ep + er else 0.0
        assert (p, r, f1) == (ep, er, ef)


# ------------------------------------------------------------ AP

GT = rect_mask(10, 10, rows=(0, 5))
FAR = rect_mask(10, 10, rows=(8, 10))


def test_ap_single_perfect_prediction():
    ap = average_precision([det(GT, 0.9, "im")], {"im": [GT]}, 0.5)
    assert ap == 1.0


def test_ap_fp_then_tp():
    preds = [det(FAR, 0.9, "im"), det(GT, 0.5, "im")]
    ap = average_precision(preds, {"im": [GT]}, 0.5)
    assert ap == 0.5


def test_ap_duplicate_tp_keeps_full_score():
    preds = [det(GT, 0.9, "im"), det(GT, 0.4, "im")]
    ap = average_precision(preds, {"im": [GT]}, 0.5)
    assert ap == 1.0


def test_ap_needs_ground_truth():
    with pytest.raises(UndefinedStatisticError):
        average_precision([det(GT, 0.9, "im")], {"im": []}, 0.5)


def test_ap_invariant_to_monotone_confidence():
    preds = [det(FAR, 0.8, "im"), det(GT, 0.6, "im"),
             det(rect_mask(10, 10, rows=(0, 6)), 0.3, "im")]
    gts = {"im": [GT, FAR]}
    base = average_precision(preds, gts, 0.5)
    squashed = [det(p.mask, p.confidence ** 3, p.image_id) for p in preds]
    assert average_precision(squashed, gts, 0.5) == base


def test_map_mean_of_thresholds():
    preds = [det(GT, 0.9, "im")]
    gts = {"im": [GT]}
    ap50 = average_precision(preds, gts, 0.5)
    ap75 = average_precision(preds, gts, 0.75)
    assert map_over_thresholds(preds, gts, [0.5, 0.75]) == \
        pytest.approx((ap50 + ap75) / 2)


def test_all_detection_metrics_in_unit_range():
    rng = np.random.default_rng(5)
    preds, gts = [], {"im": []}
    for i in range(6):
        m = MaskRegion(12, 12, rng.uniform(size=(12, 12)) > 0.6)
        preds.append(det(m, float(rng.uniform()), "im"))
    for i in range(4):
        gts["im"].append(MaskRegion(12, 12, rng.uniform(size=(12, 12)) > 0.6))
    counts, _ = match_instances(preds, gts["im"], 0.5)
    p, r, f1 = precision_recall_f1(counts)
    ap = average_precision(preds, gts, 0.5)
    for v in (p, r, f1, ap):
        assert 0.0 <= v <= 1.0
