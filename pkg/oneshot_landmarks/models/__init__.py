"""
Domain models.
"""
from oneshot_landmarks.models.geometry import CoordTransform, GridIndex, Point
from oneshot_landmarks.models.grids import FeatureMap, ImageGrid, LandmarkSet, SimilarityMap
from oneshot_landmarks.models.results import DetectionResult, MatchResult
from oneshot_landmarks.models.specs import (
    AugmentationRanges,
    BackboneSpec,
    DecoderConfig,
    GaussianTargetSpec,
    InferenceConfig,
    MatchConfig,
    PatchGridGeometry,
    TrainConfig,
)

__all__ = [
    "AugmentationRanges",
    "BackboneSpec",
    "CoordTransform",
    "DecoderConfig",
    "DetectionResult",
    "FeatureMap",
    "GaussianTargetSpec",
    "GridIndex",
    "ImageGrid",
    "InferenceConfig",
    "LandmarkSet",
    "MatchConfig",
    "MatchResult",
    "PatchGridGeometry",
    "Point",
    "SimilarityMap",
    "TrainConfig",
]
