"""
Datasets, metrics and evaluation reports.
"""
from oneshot_landmarks.evaldata.metrics import HAND_THRESHOLDS_MM, HEAD_THRESHOLDS_MM, mre, sdr

__all__ = ["HAND_THRESHOLDS_MM", "HEAD_THRESHOLDS_MM", "mre", "sdr"]
