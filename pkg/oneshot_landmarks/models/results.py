"""
Matching and detection results.
"""
from typing import Dict, List, Tuple

from pydantic import BaseModel, Field

from oneshot_landmarks.models.geometry import GridIndex, Point


class MatchResult(BaseModel):
    """Outcome of bidirectional matching for one landmark."""

    query_point: GridIndex = Field(description="Selected query cell, the prediction")
    template_point: GridIndex = Field(description="Where the prediction matches back onto the template")
    candidates: List[GridIndex] = Field(description="Top-k forward candidates")
    pairs: List[Tuple[GridIndex, GridIndex]] = Field(description="(candidate, inverse match) pairs")
    inverse_error: float = Field(ge=0, description="Grid distance from inverse match to the template landmark")
    forward_similarity: float = Field(description="Forward cosine similarity of the selected candidate")


class DetectionResult(BaseModel):
    """Per-landmark predictions on one query image, in original pixels."""

    points: List[Point]
    coarse_points: List[Point]
    diagnostics: Dict[str, List[MatchResult]] = Field(default_factory=dict)

