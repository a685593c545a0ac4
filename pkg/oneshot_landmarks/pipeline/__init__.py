"""
Training and coarse-to-fine detection.
"""
from oneshot_landmarks.pipeline.augment import augment_template, sample_local_crop
from oneshot_landmarks.pipeline.bundle import load_bundle, save_bundle
from oneshot_landmarks.pipeline.detector import (
    LandmarkDetector,
    TemplateState,
    build_template_state,
    coarse_detect,
    detect,
    fine_detect,
)
from oneshot_landmarks.pipeline.imaging import crop_local_region, downsample_short_side
from oneshot_landmarks.pipeline.trainer import LossHistory, TrainResult, train_decoders

__all__ = [
    "LandmarkDetector",
    "LossHistory",
    "TemplateState",
    "TrainResult",
    "augment_template",
    "build_template_state",
    "coarse_detect",
    "crop_local_region",
    "detect",
    "downsample_short_side",
    "fine_detect",
    "load_bundle",
    "sample_local_crop",
    "save_bundle",
    "train_decoders",
]
