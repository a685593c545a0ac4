"""
Coordinate primitives.

Convention: origin at the top-left pixel center, x to the right, y downward. The same
convention holds for images, feature grids and annotation files.
"""
from typing import NamedTuple, Tuple

from pydantic import BaseModel, Field


class Point(NamedTuple):
    """A continuous 2D point, (x, y)."""
    x: float
    y: float


class GridIndex(NamedTuple):
    """A discrete grid cell, (row, col). Row-major order compares rows first."""
    row: int
    col: int

    def as_point(self) -> Point:
        """The cell center as a continuous (x, y) grid point."""
        return Point(float(self.col), float(self.row))


class CoordTransform(BaseModel):
    """
    Maps grid (feature) coordinates into the coordinate frame of an image.

    ``image = feature * scale + offset`` on both axes.
    """

    scale: float = Field(default=1.0, gt=0, description="Feature units to image pixels")
    offset: Tuple[float, float] = Field(default=(0.0, 0.0), description="(dx, dy) in image pixels")

    model_config = {"frozen": True}

    @classmethod
    def identity(cls) -> "CoordTransform":
        """The identity transform."""
        return cls(scale=1.0, offset=(0.0, 0.0))

    def compose(self, outer: "CoordTransform") -> "CoordTransform":
        """
        Chain this transform with one applied afterwards.

        Args:
            outer: Transform from this transform's image frame into a further frame

        Returns:
            Transform from this transform's feature frame into the outer frame
        """
        dx, dy = self.offset
        odx, ody = outer.offset
        return CoordTransform(
            scale=self.scale * outer.scale,
            offset=(dx * outer.scale + odx, dy * outer.scale + ody),
        )
