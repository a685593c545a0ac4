"""
Random shift/scale/rotate augmentation of the template.

A draw maps ``p' = R(angle) * scale * (p - c) + c + t`` with ``c`` the image center, so
rotation and scaling happen about the center before the shift.
"""
from typing import List, NamedTuple, Tuple

import numpy as np
import torch

from oneshot_landmarks.core import round_half_up, seeded_rng
from oneshot_landmarks.errors import AugmentationError
from oneshot_landmarks.models.geometry import Point
from oneshot_landmarks.models.grids import ImageGrid, LandmarkSet
from oneshot_landmarks.models.specs import AugmentationRanges, TrainConfig
from oneshot_landmarks.pipeline.imaging import rotation_matrix, warp_affine
from oneshot_landmarks.utils.logger import Logger

logger = Logger(__name__)

MAX_RETRIES = 100


class AffineDraw(NamedTuple):
    """One random augmentation."""
    angle_deg: float
    scale: float
    shift: Tuple[float, float]

    @property
    def is_identity(self) -> bool:
        return self.angle_deg == 0.0 and self.scale == 1.0 and self.shift == (0.0, 0.0)


def draw_affine(rng: np.random.Generator, ranges: AugmentationRanges, height: int, width: int) -> AffineDraw:
    """Sample an affine from the configured ranges."""
    angle = float(rng.uniform(-ranges.rotate_deg, ranges.rotate_deg))
    scale = float(rng.uniform(ranges.scale_min, ranges.scale_max))
    tx = float(rng.uniform(-ranges.shift_frac, ranges.shift_frac)) * width
    ty = float(rng.uniform(-ranges.shift_frac, ranges.shift_frac)) * height
    # normalize -0.0 so identity draws compare equal
    return AffineDraw(angle + 0.0, scale, (tx + 0.0, ty + 0.0))


def _forward(draw: AffineDraw, height: int, width: int) -> Tuple[torch.Tensor, Tuple[float, float]]:
    """Linear part and translation of the forward map."""
    matrix = rotation_matrix(draw.angle_deg, draw.scale)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    mx = float(matrix[0, 0] * cx + matrix[0, 1] * cy)
    my = float(matrix[1, 0] * cx + matrix[1, 1] * cy)
    return matrix, (cx - mx + draw.shift[0], cy - my + draw.shift[1])


def map_point(draw: AffineDraw, p: Point, height: int, width: int) -> Point:
    """Forward-map one point."""
    matrix, (tx, ty) = _forward(draw, height, width)
    x = float(matrix[0, 0] * p.x + matrix[0, 1] * p.y) + tx
    y = float(matrix[1, 0] * p.x + matrix[1, 1] * p.y) + ty
    return Point(x, y)


def apply_affine(img: ImageGrid, lms: LandmarkSet, draw: AffineDraw) -> Tuple[ImageGrid, LandmarkSet]:
    """
    Warp an image and its landmarks with one draw.

    The identity draw returns an exact copy.
    """
    if draw.is_identity:
        return ImageGrid(pixels=img.pixels, spacing_mm=img.spacing_mm), LandmarkSet(points=lms.points)
    matrix, translation = _forward(draw, img.height, img.width)
    warped = warp_affine(img, matrix, translation, img.height, img.width)
    points = [map_point(draw, p, img.height, img.width) for p in lms.points]
    return warped, LandmarkSet(points=points)


def augment_template(img: ImageGrid, lms: LandmarkSet, cfg: TrainConfig) -> List[Tuple[ImageGrid, LandmarkSet]]:
    """
    Build the fixed augmentation set of a training run.

    Draws whose landmarks leave the image are re-drawn.

    Args:
        img: Template image
        lms: Template landmarks
        cfg: Training config (``aug_count``, ``aug_ranges``, ``seed``)

    Returns:
        ``aug_count`` (image, landmarks) samples

    Raises:
        AugmentationError: ``augmentation-degenerate`` after too many rejected draws
    """
    rng = seeded_rng(cfg.seed)
    samples = []
    for index in range(cfg.aug_count):
        for _ in range(MAX_RETRIES):
            draw = draw_affine(rng, cfg.aug_ranges, img.height, img.width)
            points = [map_point(draw, p, img.height, img.width) for p in lms.points]
            if LandmarkSet(points=points).in_bounds(img.height, img.width):
                samples.append(apply_affine(img, lms, draw))
                break
        else:
            raise AugmentationError(
                "augmentation-degenerate",
                f"sample {index}: landmarks left the image in {MAX_RETRIES} consecutive draws",
            )
    logger.debug(f"Built {len(samples)} augmented templates")
    return samples


def sample_local_crop(
    template: ImageGrid,
    lms: LandmarkSet,
    index: int,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> Tuple[ImageGrid, Point]:
    """
    Draw one augmented training crop around a landmark.

    Only the crop window of the augmented template is resampled. The window is centered
    on the augmented landmark plus a uniform jitter of up to ``cfg.crop_jitter`` pixels.

    Args:
        template: Full-resolution template
        lms: Template landmarks
        index: Landmark the crop is built around
        cfg: Training config (``crop_size``, ``crop_jitter``, ``aug_ranges``)
        rng: Generator owned by the training run

    Returns:
        The crop and the landmark position inside it

    Raises:
        AugmentationError: ``augmentation-degenerate`` when the jitter keeps pushing the
            landmark out of the window
    """
    size = cfg.crop_size
    half = (size - 1) / 2.0
    for _ in range(MAX_RETRIES):
        draw = draw_affine(rng, cfg.aug_ranges, template.height, template.width)
        jx, jy = rng.uniform(-cfg.crop_jitter, cfg.crop_jitter, size=2)
        moved = map_point(draw, lms.points[index], template.height, template.width)
        ox = round_half_up(moved.x + jx - half)
        oy = round_half_up(moved.y + jy - half)
        local = Point(moved.x - ox, moved.y - oy)
        if 0.0 <= local.x <= size - 1 and 0.0 <= local.y <= size - 1:
            matrix, translation = _forward(draw, template.height, template.width)
            crop = warp_affine(template, matrix, translation, size, size, out_origin=(float(ox), float(oy)))
            return crop, local
    raise AugmentationError(
        "augmentation-degenerate",
        f"landmark {index} fell outside the {size}px crop in {MAX_RETRIES} consecutive draws",
    )
