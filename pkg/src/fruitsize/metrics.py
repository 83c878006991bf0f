"""Sizing-error statistics and instance-segmentation metrics.

Zero-denominator conventions are fixed here once: precision, recall and
F1 are 0 when their denominator is 0, and the IoU of two empty masks is
0. Average precision uses all-point interpolation under the monotone
precision envelope, with greedy one-to-one matching by descending
confidence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .errors import InvalidArgumentError, UndefinedStatisticError
from .types import MaskRegion


@dataclass(frozen=True)
class SizeSeries:
    """Paired actual / predicted sizes in mm."""

    actual: np.ndarray
    predicted: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.actual, dtype=np.float64).reshape(-1)
        p = np.asarray(self.predicted, dtype=np.float64).reshape(-1)
        if a.size != p.size:
            raise InvalidArgumentError(
                f"series lengths differ: {a.size} != {p.size}"
            )
        if a.size == 0:
            raise InvalidArgumentError("series must be non-empty")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(p))):
            raise InvalidArgumentError("series values must be finite")
        object.__setattr__(self, "actual", a)
        object.__setattr__(self, "predicted", p)

    def __len__(self) -> int:
        return int(self.actual.size)


@dataclass(frozen=True)
class MatchCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise InvalidArgumentError("counts must be non-negative")


@dataclass(frozen=True)
class ScoredDetection:
    """A predicted mask with a confidence score, keyed to an image."""

    mask: MaskRegion
    confidence: float
    image_id: str = ""

    def __post_init__(self):
        if not 0 <= self.confidence <= 1:
            raise InvalidArgumentError("confidence must lie in [0, 1]")


def rmse(s: SizeSeries) -> float:
    """Root mean squared error, mm."""
    d = s.predicted - s.actual
    return float(np.sqrt(np.mean(d * d)))


def mae(s: SizeSeries) -> float:
    """Mean absolute error, mm."""
    return float(np.mean(np.abs(s.actual - s.predicted)))


def mape(s: SizeSeries) -> float:
    """Mean absolute percentage error, in percent."""
    if np.any(s.actual <= 0):
        raise InvalidArgumentError("MAPE needs strictly positive actual sizes")
    return float(100.0 * np.mean(np.abs((s.actual - s.predicted) / s.actual)))


def r_squared(s: SizeSeries) -> float:
    """Coefficient of determination of predicted vs actual."""
    mean = float(np.mean(s.actual))
    ss_tot = float(np.sum((s.actual - mean) ** 2))
    if ss_tot == 0:
        raise UndefinedStatisticError("actual sizes have zero variance")
    ss_res = float(np.sum((s.actual - s.predicted) ** 2))
    return 1.0 - ss_res / ss_tot


def size_report(s: SizeSeries) -> Dict[str, float]:
    """The standard report bundle: rmse/mae/mape/r^2 plus the count."""
    return {
        "rmse_mm": rmse(s),
        "mae_mm": mae(s),
        "mape_pct": mape(s),
        "r_squared": r_squared(s),
        "n": len(s),
    }


def mask_iou(a: MaskRegion, b: MaskRegion) -> float:
    """Jaccard index of two masks; 0 when both are empty."""
    if (a.width, a.height) != (b.width, b.height):
        raise InvalidArgumentError(
            f"mask dimensions differ: {a.width}x{a.height} vs "
            f"{b.width}x{b.height}"
        )
    inter = int(np.count_nonzero(a.bitmap & b.bitmap))
    union = int(np.count_nonzero(a.bitmap | b.bitmap))
    if union == 0:
        return 0.0
    return inter / union


def match_instances(preds: Sequence[ScoredDetection],
                    gts: Sequence[MaskRegion], iou_threshold: float
                    ) -> Tuple[MatchCounts, List[Tuple[int, int]]]:
    """Greedy one-to-one matching within a single image.

    Predictions are visited in descending confidence (ties keep input
    order); each claims the unmatched ground truth of highest IoU >= the
    threshold. Returns the counts and the (pred_index, gt_index) pairs.
    """
    if not 0 <= iou_threshold <= 1:
        raise InvalidArgumentError("iou_threshold must lie in [0, 1]")
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))
    taken = [False] * len(gts)
    assignment: List[Tuple[int, int]] = []
    for i in order:
        best_j = -1
        best_iou = -1.0
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            val = mask_iou(preds[i].mask, gt)
            # overlap must be positive: a zero-IoU pair is never a match
            if val > 0 and val >= iou_threshold and val > best_iou:
                best_iou = val
                best_j = j
        if best_j >= 0:
            taken[best_j] = True
            assignment.append((i, best_j))
    tp = len(assignment)
    counts = MatchCounts(tp=tp, fp=len(preds) - tp, fn=len(gts) - tp)
    return counts, assignment


def precision_recall_f1(c: MatchCounts) -> Tuple[float, float, float]:
    """Precision, recall and F1 with the 0/0 -> 0 convention."""
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) else 0.0
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if (precision + recall) else 0.0)
    return precision, recall, f1


def _ranked_tp_flags(preds: Sequence[ScoredDetection],
                     gts_by_image: Mapping[str, Sequence[MaskRegion]],
                     iou_threshold: float) -> Tuple[np.ndarray, int]:
    n_gt = sum(len(v) for v in gts_by_image.values())
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))
    taken = {img: [False] * len(v) for img, v in gts_by_image.items()}
    flags = np.zeros(len(preds), dtype=bool)
    for rank, i in enumerate(order):
        det = preds[i]
        gts = gts_by_image.get(det.image_id, ())
        best_j = -1
        best_iou = -1.0
        for j, gt in enumerate(gts):
            if taken[det.image_id][j]:
                continue
            val = mask_iou(det.mask, gt)
            if val > 0 and val >= iou_threshold and val > best_iou:
                best_iou = val
                best_j = j
        if best_j >= 0:
            taken[det.image_id][best_j] = True
            flags[rank] = True
    return flags, n_gt


def average_precision(preds: Sequence[ScoredDetection],
                      gts_by_image: Mapping[str, Sequence[MaskRegion]],
                      iou_threshold: float) -> float:
    """Area under the interpolated precision-recall curve.

    Detections across all images are ranked by confidence; the precision
    envelope p(r) = max over recall' >= r of precision(recall') is
    integrated over the recall steps (all-point interpolation).
    """
    flags, n_gt = _ranked_tp_flags(preds, gts_by_image, iou_threshold)
    if n_gt == 0:
        raise UndefinedStatisticError("average precision needs >= 1 ground truth")
    if flags.size == 0:
        return 0.0
    tp_cum = np.cumsum(flags)
    ranks = np.arange(1, flags.size + 1)
    precision = tp_cum / ranks
    recall = tp_cum / n_gt
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev) * envelope))


def map_over_thresholds(preds: Sequence[ScoredDetection],
                        gts_by_image: Mapping[str, Sequence[MaskRegion]],
                        thresholds: Sequence[float]) -> float:
    """Mean AP over the given IoU thresholds (single class)."""
    if not thresholds:
        raise InvalidArgumentError("thresholds must be non-empty")
    return float(np.mean([average_precision(preds, gts_by_image, t)
                          for t in thresholds]))
