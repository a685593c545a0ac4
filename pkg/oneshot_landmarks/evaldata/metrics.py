"""
Radial error metrics.
"""
import math
from typing import List, Sequence

from oneshot_landmarks.core import PointLike, euclidean_dist

HEAD_THRESHOLDS_MM = (2.0, 2.5, 3.0, 4.0)
HAND_THRESHOLDS_MM = (2.0, 4.0, 10.0)


def radial_errors(preds: Sequence[PointLike], gts: Sequence[PointLike], mm_per_px: float) -> List[float]:
    """
    Per-point Euclidean errors in millimeters.

    Raises:
        ValueError: For unequal or empty lists, or a non-positive resolution
    """
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predictions for {len(gts)} ground-truth points")
    if not preds:
        raise ValueError("no points to compare")
    if mm_per_px <= 0:
        raise ValueError(f"mm_per_px must be positive, got {mm_per_px}")
    return [euclidean_dist(p, g) * mm_per_px for p, g in zip(preds, gts)]


def mean_error(errors_mm: Sequence[float]) -> float:
    """Order-independent exact mean of a list of errors."""
    if not errors_mm:
        raise ValueError("no errors to average")
    return math.fsum(errors_mm) / len(errors_mm)


def mre(preds: Sequence[PointLike], gts: Sequence[PointLike], mm_per_px: float) -> float:
    """
    Mean radial error in millimeters.

    Args:
        preds: Predicted (x, y) points
        gts: Ground-truth (x, y) points
        mm_per_px: Isotropic resolution

    Returns:
        Mean Euclidean error times the resolution
    """
    return mean_error(radial_errors(preds, gts, mm_per_px))


def sdr(errors_mm: Sequence[float], thresholds_mm: Sequence[float]) -> List[float]:
    """
    Successful detection rate per threshold.

    An error counts as a success only when strictly below the threshold.

    Args:
        errors_mm: Radial errors
        thresholds_mm: Positive, ascending thresholds

    Returns:
        Percentages in [0, 100], one per threshold
    """
    if not errors_mm:
        raise ValueError("no errors to rate")
    if any(t <= 0 for t in thresholds_mm) or list(thresholds_mm) != sorted(thresholds_mm):
        raise ValueError(f"thresholds must be positive and ascending, got {list(thresholds_mm)}")
    count = len(errors_mm)
    return [100.0 * sum(1 for e in errors_mm if e < t) / count for t in thresholds_mm]
