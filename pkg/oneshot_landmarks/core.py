"""
Coordinate transforms, distances, grid snapping and seeded randomness.

All functions are pure.
"""
import hashlib
import math
from typing import Sequence, Union

import numpy as np
import torch

from oneshot_landmarks.models.geometry import CoordTransform, GridIndex, Point
from oneshot_landmarks.models.grids import ImageGrid

PointLike = Union[Point, Sequence[float]]


def to_feature_coords(p: PointLike, t: CoordTransform) -> Point:
    """
    Map an image point into feature-grid units.

    Args:
        p: (x, y) in image pixels
        t: Transform of the feature grid

    Returns:
        (x, y) in (continuous) grid units
    """
    dx, dy = t.offset
    return Point((p[0] - dx) / t.scale, (p[1] - dy) / t.scale)


def to_image_coords(p: PointLike, t: CoordTransform) -> Point:
    """
    Map a feature-grid point into image pixels (inverse of ``to_feature_coords``).

    Args:
        p: (x, y) in grid units
        t: Transform of the feature grid

    Returns:
        (x, y) in image pixels
    """
    dx, dy = t.offset
    return Point(p[0] * t.scale + dx, p[1] * t.scale + dy)


def euclidean_dist(a: PointLike, b: PointLike) -> float:
    """Euclidean distance between two points."""
    return math.hypot(a[0] - b[0], a[1] - b[1])


def round_half_up(value: float) -> int:
    """Round to the nearest integer, halves going up."""
    return int(math.floor(value + 0.5))


def snap_to_grid(p: PointLike, grid_h: int, grid_w: int) -> GridIndex:
    """
    Snap a continuous grid point to the nearest cell.

    Rounds half up independently per axis, then clamps into the grid.

    Args:
        p: (x, y) in grid units
        grid_h: Number of rows
        grid_w: Number of columns

    Returns:
        The nearest (row, col)
    """
    col = min(max(round_half_up(p[0]), 0), grid_w - 1)
    row = min(max(round_half_up(p[1]), 0), grid_h - 1)
    return GridIndex(row, col)


def image_checksum(image: ImageGrid) -> str:
    """SHA-256 over the shape and float32 pixel bytes."""
    digest = hashlib.sha256()
    digest.update(f"{image.height}x{image.width}".encode())
    digest.update(np.ascontiguousarray(image.pixels, dtype=np.float32).tobytes())
    return digest.hexdigest()


def seeded_rng(seed: int) -> np.random.Generator:
    """Numpy generator for a seed."""
    return np.random.default_rng(seed)


def seeded_torch_generator(seed: int) -> torch.Generator:
    """CPU torch generator for a seed."""
    generator = torch.Generator()
    generator.manual_seed(int(seed))
    return generator


def clamp_point(p: PointLike, height: int, width: int) -> Point:
    """Clamp a point into [0, W-1] x [0, H-1]."""
    return Point(min(max(float(p[0]), 0.0), width - 1.0), min(max(float(p[1]), 0.0), height - 1.0))
