"""Salient object detection metrics: IoU, pixel accuracy, F-beta and max F-beta.

Soft predictions are 8-bit gray images. For IoU and accuracy they are
binarised at value > 127; max F-beta sweeps every threshold t in 0..254 and
binarises at value > t. Dataset scores are unweighted per-image means,
accumulated in sorted filename order.
"""

from __future__ import annotations

import csv
import io
from typing import TYPE_CHECKING, Any

import numpy as np

from spectral_vote.array_io import GRAY_THRESHOLD, resize_gray_nearest
from spectral_vote.exceptions import (
    EmptyGroundTruthError,
    ParameterError,
    ShapeMismatchError,
)
from spectral_vote.models import BinaryMask, EvalRecord, EvalReport, SoftMask

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    import numpy.typing as npt

DEFAULT_BETA_SQ = 0.3
GRAY_LEVELS = 256
MAX_THRESHOLD = 254


def _check_same_grid(a: BinaryMask, b: BinaryMask) -> None:
    if a.grid != b.grid:
        msg = f"Mask grids differ: {a.grid} vs {b.grid}"
        raise ShapeMismatchError(msg)


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union; two empty masks score 1.0."""
    _check_same_grid(a, b)
    union = int(np.count_nonzero(a.bits | b.bits))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(a.bits & b.bits)) / union


def accuracy(pred: BinaryMask, gt: BinaryMask) -> float:
    """Fraction of pixels where prediction and ground truth agree."""
    _check_same_grid(pred, gt)
    return int(np.count_nonzero(pred.bits == gt.bits)) / pred.bits.size


def _f_beta_from_counts(tp: int, fp: int, fn: int, beta_sq: float) -> float:
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return (1 + beta_sq) * precision * recall / (beta_sq * precision + recall)


def f_beta(pred: BinaryMask, gt: BinaryMask, beta_sq: float = DEFAULT_BETA_SQ) -> float:
    """Weighted harmonic mean of precision and recall; 0 without true positives.

    Raises:
        ShapeMismatchError: If the grids differ
        EmptyGroundTruthError: If the ground truth has no foreground
    """
    _check_same_grid(pred, gt)
    if gt.area == 0:
        raise EmptyGroundTruthError
    tp = int(np.count_nonzero(pred.bits & gt.bits))
    fp = int(np.count_nonzero(pred.bits & ~gt.bits))
    fn = int(np.count_nonzero(~pred.bits & gt.bits))
    return _f_beta_from_counts(tp, fp, fn, beta_sq)


def quantize_soft_mask(mask: SoftMask) -> npt.NDArray[np.uint8]:
    """Map [0, 1] values to 0..255 by rounding value*255 half up."""
    return np.floor(mask.values * 255.0 + 0.5).astype(np.uint8)


def _as_gray(pred: SoftMask | npt.ArrayLike) -> npt.NDArray[np.int64]:
    gray = quantize_soft_mask(pred) if isinstance(pred, SoftMask) else np.asarray(pred)
    if gray.ndim != 2:  # noqa: PLR2004
        msg = f"Prediction must be a 2-D gray image, got shape {gray.shape}"
        raise ShapeMismatchError(msg)
    if not np.issubdtype(gray.dtype, np.integer):
        msg = f"Gray prediction must hold integers 0..255, got {gray.dtype}"
        raise ParameterError(msg)
    if gray.size and (gray.min() < 0 or gray.max() >= GRAY_LEVELS):
        msg = "Gray prediction values must lie in 0..255"
        raise ParameterError(msg)
    return gray.astype(np.int64)


def _at_least_counts(values: npt.NDArray[np.int64]) -> npt.NDArray[np.int64]:
    return np.cumsum(np.bincount(values, minlength=GRAY_LEVELS)[::-1])[::-1]


def max_f_beta(
    pred: SoftMask | npt.ArrayLike, gt: BinaryMask, beta_sq: float = DEFAULT_BETA_SQ
) -> float:
    """Best F-beta over the binarisations pred > t for t in 0..254.

    Args:
        pred: SoftMask (quantised first) or 0..255 integer gray image
        gt: Ground-truth mask on the same grid
        beta_sq: Precision weight, 0.3 by convention

    Raises:
        ShapeMismatchError: If the grids differ
        EmptyGroundTruthError: If the ground truth has no foreground
    """
    gray = _as_gray(pred)
    if gray.shape != gt.grid:
        msg = f"Prediction grid {gray.shape} differs from ground truth {gt.grid}"
        raise ShapeMismatchError(msg)
    if gt.area == 0:
        raise EmptyGroundTruthError

    # at_least[v] = pixels with value >= v, so value > t counts are at_least[t + 1]
    fg_at_least = _at_least_counts(gray[gt.bits])
    bg_at_least = _at_least_counts(gray[~gt.bits])
    positives = gt.area
    best = 0.0
    for t in range(MAX_THRESHOLD + 1):
        tp = int(fg_at_least[t + 1])
        fp = int(bg_at_least[t + 1])
        best = max(best, _f_beta_from_counts(tp, fp, positives - tp, beta_sq))
    return best


def upper_bound_iou(masks: Sequence[BinaryMask], gt: BinaryMask) -> tuple[float, int]:
    """Best IoU any candidate reaches against the ground truth, and its index.

    The lowest index wins ties. Masks must already be on the ground-truth grid.

    Raises:
        ParameterError: If the list is empty
        ShapeMismatchError: If a mask's grid differs from the ground truth
    """
    if not masks:
        msg = "Upper-bound IoU needs at least one candidate mask"
        raise ParameterError(msg)
    scores = [iou(mask, gt) for mask in masks]
    best = max(scores)
    return best, scores.index(best)


# =============================================================================
# Dataset evaluation
# =============================================================================


def evaluate_pair(name: str, pred_gray: npt.ArrayLike, gt: BinaryMask) -> EvalRecord:
    """Score one gray prediction, nearest-resampled to the ground-truth grid."""
    gray = _as_gray(pred_gray)
    if gray.shape != gt.grid:
        gray = resize_gray_nearest(gray, *gt.grid)
    binary = BinaryMask(gray > GRAY_THRESHOLD)
    return EvalRecord(
        name=name,
        iou=iou(binary, gt),
        accuracy=accuracy(binary, gt),
        max_f_beta=max_f_beta(gray, gt),
    )


def summarise(records: Iterable[EvalRecord], missing: Iterable[str] = ()) -> EvalReport:
    """Unweighted means over records, summed in sorted name order."""
    ordered = tuple(sorted(records, key=lambda record: record.name))
    count = len(ordered)

    def mean(values: list[float]) -> float:
        return sum(values, 0.0) / count if count else 0.0

    return EvalReport(
        records=ordered,
        missing=tuple(sorted(missing)),
        iou=mean([record.iou for record in ordered]),
        accuracy=mean([record.accuracy for record in ordered]),
        max_f_beta=mean([record.max_f_beta for record in ordered]),
    )


def report_as_dict(report: EvalReport) -> dict[str, Any]:
    """JSON-ready view of a report."""
    return {
        "images": [
            {
                "name": record.name,
                "iou": record.iou,
                "accuracy": record.accuracy,
                "max_f_beta": record.max_f_beta,
            }
            for record in report.records
        ],
        "missing": list(report.missing),
        "mean": {
            "iou": report.iou,
            "accuracy": report.accuracy,
            "max_f_beta": report.max_f_beta,
        },
        "count": len(report.records),
    }


def report_as_csv(report: EvalReport) -> str:
    """One CSV row per image: name, iou, accuracy, max_f_beta."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["name", "iou", "accuracy", "max_f_beta"])
    for record in report.records:
        writer.writerow([record.name, record.iou, record.accuracy, record.max_f_beta])
    return buffer.getvalue()
