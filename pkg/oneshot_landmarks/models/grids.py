"""
Raster, landmark and feature containers.
"""
from typing import Optional, Tuple

import numpy as np
import torch
from pydantic import BaseModel, Field, field_validator, model_validator

from oneshot_landmarks.errors import GeometryError
from oneshot_landmarks.models.geometry import CoordTransform, GridIndex, Point


class ImageGrid(BaseModel):
    """
    A single-channel 2D raster with intensities in [0, 1].

    The pixel array is copied on construction and made read-only.
    """

    pixels: np.ndarray = Field(description="2D float32 intensities, shape (height, width)")
    spacing_mm: Optional[float] = Field(default=None, gt=0, description="Isotropic mm per pixel")

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    @field_validator("pixels", mode="before")
    @classmethod
    def _validate_pixels(cls, value) -> np.ndarray:
        array = np.array(value, dtype=np.float32, copy=True)
        if array.ndim != 2:
            raise ValueError(f"image must be 2D, got shape {array.shape}")
        if array.shape[0] < 1 or array.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if not np.all(np.isfinite(array)):
            raise ValueError("image contains non-finite intensities")
        if array.min() < 0.0 or array.max() > 1.0:
            raise ValueError("image intensities must lie in [0, 1]")
        array.flags.writeable = False
        return array

    @property
    def height(self) -> int:
        """Number of rows."""
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        """Number of columns."""
        return int(self.pixels.shape[1])

    def to_tensor(self) -> torch.Tensor:
        """The pixels as a (1, 1, H, W) float32 tensor (a copy)."""
        return torch.from_numpy(self.pixels.copy()).unsqueeze(0).unsqueeze(0)


class LandmarkSet(BaseModel):
    """
    Ordered landmarks in image pixel coordinates.
    """

    points: Tuple[Point, ...] = Field(description="Landmarks as (x, y) pixel coordinates")

    model_config = {"frozen": True}

    @field_validator("points", mode="before")
    @classmethod
    def _validate_points(cls, value) -> Tuple[Point, ...]:
        points = tuple(Point(float(p[0]), float(p[1])) for p in value)
        if len(points) < 1:
            raise ValueError("a landmark set needs at least one point")
        for p in points:
            if not (np.isfinite(p.x) and np.isfinite(p.y)):
                raise ValueError(f"non-finite landmark coordinate {p}")
        return points

    @property
    def count(self) -> int:
        """Number of landmarks, N."""
        return len(self.points)

    def in_bounds(self, height: int, width: int) -> bool:
        """Whether every point satisfies 0 <= x <= W-1 and 0 <= y <= H-1."""
        return all(0.0 <= p.x <= width - 1 and 0.0 <= p.y <= height - 1 for p in self.points)

    def check_bounds(self, image: ImageGrid) -> None:
        """
        Validate the landmarks against the owning image.

        Raises:
            GeometryError: ``landmark-out-of-bounds`` naming the first offending index
        """
        self.check_size(image.width, image.height)

    def check_size(self, width: int, height: int) -> None:
        """Like ``check_bounds``, for an image known only by its size."""
        for i, p in enumerate(self.points):
            if not (0.0 <= p.x <= width - 1 and 0.0 <= p.y <= height - 1):
                raise GeometryError(
                    "landmark-out-of-bounds",
                    f"landmark {i} at ({p.x}, {p.y}) lies outside a {width}x{height} image",
                )


class FeatureMap(BaseModel):
    """
    A dense grid of D-dimensional descriptors.

    ``data`` is channel-first, shape (D, H_f, W_f). ``transform`` maps (x=col, y=row) grid
    coordinates into the frame of the source image.
    """

    data: torch.Tensor
    transform: CoordTransform = Field(default_factory=CoordTransform.identity)

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    @model_validator(mode="after")
    def _validate_data(self) -> "FeatureMap":
        if self.data.dim() != 3:
            raise ValueError(f"feature data must be (D, H, W), got shape {tuple(self.data.shape)}")
        if min(self.data.shape) < 1:
            raise ValueError("feature maps need D, H, W >= 1")
        if not bool(torch.isfinite(self.data).all()):
            raise ValueError("feature map contains non-finite values")
        return self

    @property
    def dim(self) -> int:
        """Descriptor dimension D."""
        return int(self.data.shape[0])

    @property
    def grid_h(self) -> int:
        """Grid rows."""
        return int(self.data.shape[1])

    @property
    def grid_w(self) -> int:
        """Grid columns."""
        return int(self.data.shape[2])

    def vector_at(self, index: GridIndex) -> torch.Tensor:
        """Descriptor at a grid cell."""
        return self.data[:, index.row, index.col]


class SimilarityMap(BaseModel):
    """
    A scalar grid of similarities for one landmark anchor.
    """

    values: torch.Tensor = Field(description="(H_f, W_f) scalar grid")
    anchor: int = Field(default=0, description="Landmark index the map was computed for")

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    @model_validator(mode="after")
    def _validate_values(self) -> "SimilarityMap":
        if self.values.dim() != 2:
            raise ValueError(f"similarity values must be 2D, got shape {tuple(self.values.shape)}")
        return self

    @property
    def shape(self) -> Tuple[int, int]:
        """(rows, cols)."""
        return int(self.values.shape[0]), int(self.values.shape[1])
