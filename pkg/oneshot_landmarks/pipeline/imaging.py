"""
Resizing, cropping and affine warping of image grids.
"""
import math
from typing import Optional, Tuple

import torch
import torch.nn.functional as F

from oneshot_landmarks.core import PointLike, round_half_up
from oneshot_landmarks.models.geometry import CoordTransform
from oneshot_landmarks.models.grids import ImageGrid

DEFAULT_SHORT_SIDE = 224
DEFAULT_CROP_SIZE = 224


def downsample_short_side(img: ImageGrid, target: int = DEFAULT_SHORT_SIDE) -> Tuple[ImageGrid, CoordTransform]:
    """
    Resize so the short side equals ``target``, keeping the aspect ratio.

    The long side is rounded to the nearest integer. Pixel centers stay aligned, so the
    returned transform (downsampled -> original) has scale ``short / target`` and offset
    ``0.5 * scale - 0.5`` on both axes.

    Args:
        img: Source image
        target: Short side after resizing

    Returns:
        The resized image and its transform into the original frame
    """
    short = min(img.height, img.width)
    if short == target:
        return ImageGrid(pixels=img.pixels, spacing_mm=img.spacing_mm), CoordTransform.identity()

    scale = short / target
    if img.height <= img.width:
        new_h, new_w = target, round_half_up(img.width / scale)
    else:
        new_h, new_w = round_half_up(img.height / scale), target

    resized = F.interpolate(
        img.to_tensor().to(torch.float64),
        size=(new_h, new_w),
        mode="bilinear",
        align_corners=False,
        antialias=scale > 1.0,
    )[0, 0].clamp(0.0, 1.0)
    spacing = img.spacing_mm * scale if img.spacing_mm is not None else None
    transform = CoordTransform(scale=scale, offset=(0.5 * scale - 0.5, 0.5 * scale - 0.5))
    return ImageGrid(pixels=resized.numpy(), spacing_mm=spacing), transform


def crop_local_region(
    img: ImageGrid,
    center: PointLike,
    size: int = DEFAULT_CROP_SIZE,
) -> Tuple[ImageGrid, CoordTransform]:
    """
    Cut a size x size window centered on a point, shifted to stay inside the image.

    Images smaller than the window are zero-padded on the bottom and right first, so the
    crop origin never moves.

    Args:
        img: Source image
        center: (x, y) window center in image pixels
        size: Window side

    Returns:
        The crop and its transform (crop -> original)
    """
    pixels = torch.from_numpy(img.pixels.copy())
    pad_h = max(0, size - img.height)
    pad_w = max(0, size - img.width)
    if pad_h or pad_w:
        pixels = F.pad(pixels, (0, pad_w, 0, pad_h))
    height, width = pixels.shape

    half = (size - 1) / 2.0
    ox = min(max(round_half_up(center[0] - half), 0), width - size)
    oy = min(max(round_half_up(center[1] - half), 0), height - size)
    crop = pixels[oy:oy + size, ox:ox + size]
    return (
        ImageGrid(pixels=crop.numpy(), spacing_mm=img.spacing_mm),
        CoordTransform(scale=1.0, offset=(float(ox), float(oy))),
    )


def rotation_matrix(angle_deg: float, scale: float = 1.0) -> torch.Tensor:
    """2x2 matrix ``scale * [[cos, -sin], [sin, cos]]`` in float64."""
    theta = math.radians(angle_deg)
    c, s = math.cos(theta), math.sin(theta)
    return torch.tensor([[c, -s], [s, c]], dtype=torch.float64) * scale


def warp_affine(
    img: ImageGrid,
    matrix: torch.Tensor,
    translation: Tuple[float, float],
    out_h: int,
    out_w: int,
    out_origin: Optional[Tuple[float, float]] = None,
) -> ImageGrid:
    """
    Resample an image under the forward map ``p' = matrix @ p + translation``.

    Output pixel (i, j) sits at ``out_origin + (j, i)`` in the forward frame; content
    mapped from outside the source is zero.

    Args:
        img: Source image
        matrix: 2x2 forward linear part
        translation: Forward (tx, ty)
        out_h: Output rows
        out_w: Output columns
        out_origin: Forward-frame position of output pixel (0, 0)

    Returns:
        The warped image
    """
    ox, oy = out_origin or (0.0, 0.0)
    inverse = torch.linalg.inv(matrix.to(torch.float64))
    xs = torch.arange(out_w, dtype=torch.float64) + ox - translation[0]
    ys = torch.arange(out_h, dtype=torch.float64) + oy - translation[1]
    grid_y, grid_x = torch.meshgrid(ys, xs, indexing="ij")
    src_x = inverse[0, 0] * grid_x + inverse[0, 1] * grid_y
    src_y = inverse[1, 0] * grid_x + inverse[1, 1] * grid_y

    gx = src_x * (2.0 / (img.width - 1)) - 1.0 if img.width > 1 else src_x * 0.0
    gy = src_y * (2.0 / (img.height - 1)) - 1.0 if img.height > 1 else src_y * 0.0
    grid = torch.stack((gx, gy), dim=-1).unsqueeze(0)
    warped = F.grid_sample(
        img.to_tensor().to(torch.float64),
        grid,
        mode="bilinear",
        padding_mode="zeros",
        align_corners=True,
    )[0, 0].clamp(0.0, 1.0)
    return ImageGrid(pixels=warped.numpy(), spacing_mm=img.spacing_mm)
