"""
Procedural benchmark datasets with exact landmark correspondences.

The template is a textured elliptical body on a black background; landmarks sit on
texture blobs. Each query warps the template by a random affine plus a smooth,
low-amplitude displacement field. Landmarks are carried forward exactly by solving the
backward warp for each point with fixed-point iteration.
"""
import json
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field
from scipy import ndimage

from oneshot_landmarks.core import seeded_rng
from oneshot_landmarks.errors import AugmentationError
from oneshot_landmarks.evaldata.dataset import write_annotations, write_image
from oneshot_landmarks.models.geometry import Point
from oneshot_landmarks.models.grids import ImageGrid, LandmarkSet
from oneshot_landmarks.utils.logger import Logger

logger = Logger(__name__)

FIXED_POINT_ITERATIONS = 30
MAX_DRAWS = 100


class SynthParams(BaseModel):
    """Synthetic dataset parameters."""

    queries: int = Field(default=50, ge=0, description="Number of query images")
    landmark_count: int = Field(default=5, ge=1)
    height: int = Field(default=96, ge=16)
    width: int = Field(default=96, ge=16)
    blobs: int = Field(default=40, ge=1, description="Texture blobs on the body")
    rotate_deg: float = Field(default=8.0, ge=0)
    scale_jitter: float = Field(default=0.06, ge=0, lt=1, description="Max relative scale change")
    shift_frac: float = Field(default=0.05, ge=0)
    elastic_px: float = Field(default=1.5, ge=0, description="Max displacement of the smooth field")
    elastic_smoothness: float = Field(default=12.0, gt=0, description="Gaussian sigma of the field, px")
    spacing_mm: float = Field(default=1.0, gt=0)
    seed: int = 0


def render_template(params: SynthParams, rng: np.random.Generator) -> Tuple[np.ndarray, List[Point]]:
    """
    Draw the template texture and pick landmarks on its blobs.

    Returns:
        (H, W) float64 pixels in [0, 1] and the landmarks
    """
    h, w = params.height, params.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ry, rx = 0.4 * h, 0.36 * w
    body = np.clip(1.5 - ((xs - cx) / rx) ** 2 - ((ys - cy) / ry) ** 2, 0.0, 1.0) ** 0.5

    pixels = 0.25 * body
    centers = []
    while len(centers) < params.blobs:
        angle = rng.uniform(0, 2 * np.pi)
        radius = np.sqrt(rng.uniform(0, 0.7))
        bx, by = cx + radius * rx * np.cos(angle), cy + radius * ry * np.sin(angle)
        sigma = rng.uniform(1.5, 4.0)
        amplitude = rng.uniform(0.15, 0.5)
        pixels = pixels + amplitude * np.exp(-((xs - bx) ** 2 + (ys - by) ** 2) / (2 * sigma ** 2))
        centers.append((bx, by))
    pixels = np.clip(pixels * body, 0.0, 1.0)

    min_gap = 0.12 * min(h, w)
    landmarks: List[Point] = []
    for bx, by in centers:
        if all(np.hypot(bx - p.x, by - p.y) >= min_gap for p in landmarks):
            landmarks.append(Point(float(bx), float(by)))
        if len(landmarks) == params.landmark_count:
            break
    if len(landmarks) < params.landmark_count:
        raise AugmentationError(
            "synthetic-degenerate",
            f"could not place {params.landmark_count} separated landmarks on a {w}x{h} template",
        )
    return pixels, landmarks


def _displacement(params: SynthParams, rng: np.random.Generator) -> np.ndarray:
    """Smooth (2, H, W) displacement field with max magnitude ``elastic_px``."""
    field = rng.standard_normal((2, params.height, params.width))
    field = np.stack([ndimage.gaussian_filter(c, params.elastic_smoothness, mode="reflect") for c in field])
    peak = np.abs(field).max()
    return field * (params.elastic_px / peak) if peak > 0 else field


def _affine(params: SynthParams, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Forward affine (matrix, translation) about the image center."""
    theta = np.radians(rng.uniform(-params.rotate_deg, params.rotate_deg))
    scale = 1.0 + rng.uniform(-params.scale_jitter, params.scale_jitter)
    matrix = scale * np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    center = np.array([(params.width - 1) / 2.0, (params.height - 1) / 2.0])
    shift = rng.uniform(-params.shift_frac, params.shift_frac, size=2) * np.array([params.width, params.height])
    return matrix, center - matrix @ center + shift


def _sample_field(field: np.ndarray, x: float, y: float) -> np.ndarray:
    coords = np.array([[y], [x]])
    return np.array([ndimage.map_coordinates(c, coords, order=1, mode="nearest")[0] for c in field])


def warp_sample(
    pixels: np.ndarray,
    landmarks: List[Point],
    params: SynthParams,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, List[Point]]:
    """
    Apply one random affine plus elastic-lite warp.

    Output pixel q samples the source at ``A^-1(q) + d(q)``; each landmark p moves to the
    q solving that equation.

    Raises:
        AugmentationError: ``synthetic-degenerate`` when landmarks keep leaving the frame
    """
    h, w = pixels.shape
    for _ in range(MAX_DRAWS):
        matrix, translation = _affine(params, rng)
        field = _displacement(params, rng)
        inverse = np.linalg.inv(matrix)

        ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
        src_x = inverse[0, 0] * (xs - translation[0]) + inverse[0, 1] * (ys - translation[1]) + field[0]
        src_y = inverse[1, 0] * (xs - translation[0]) + inverse[1, 1] * (ys - translation[1]) + field[1]
        warped = ndimage.map_coordinates(pixels, [src_y, src_x], order=1, mode="constant", cval=0.0)

        moved = []
        for p in landmarks:
            q = matrix @ np.array([p.x, p.y]) + translation
            for _ in range(FIXED_POINT_ITERATIONS):
                d = _sample_field(field, q[0], q[1])
                q = matrix @ (np.array([p.x, p.y]) - d) + translation
            moved.append(Point(float(q[0]), float(q[1])))
        if LandmarkSet(points=moved).in_bounds(h, w):
            return np.clip(warped, 0.0, 1.0), moved
    raise AugmentationError("synthetic-degenerate", f"landmarks left the frame in {MAX_DRAWS} draws")


def generate_samples(params: SynthParams) -> List[Tuple[ImageGrid, LandmarkSet]]:
    """
    Build the template (first) and the queries in memory.

    Deterministic for a fixed seed.
    """
    rng = seeded_rng(params.seed)
    pixels, landmarks = render_template(params, rng)
    samples = [(ImageGrid(pixels=pixels, spacing_mm=params.spacing_mm), LandmarkSet(points=landmarks))]
    for _ in range(params.queries):
        warped, moved = warp_sample(pixels, landmarks, params, rng)
        samples.append((ImageGrid(pixels=warped, spacing_mm=params.spacing_mm), LandmarkSet(points=moved)))
    return samples


def sample_id(index: int) -> str:
    """Zero-padded sample id; index 0 is the template."""
    return f"{index:04d}"


def generate_synthetic_dataset(out_dir: Union[str, Path], params: SynthParams) -> Path:
    """
    Write a synthetic dataset loadable by ``load_dataset``.

    Layout: ``images/<id>.png``, ``annotations/<id>.csv`` and ``manifest.json``.

    Returns:
        The manifest path
    """
    out_dir = Path(out_dir)
    samples = generate_samples(params)
    for index, (image, landmarks) in enumerate(samples):
        write_image(image, out_dir / "images" / f"{sample_id(index)}.png")
        write_annotations(landmarks.points, out_dir / "annotations" / f"{sample_id(index)}.csv")

    manifest = {
        "name": "synthetic",
        "image_dir": "images",
        "annotation_dir": "annotations",
        "landmark_count": params.landmark_count,
        "calibration": {"mode": "spacing", "spacing_mm": params.spacing_mm},
        "template_id": sample_id(0),
        "test_ids": [sample_id(i) for i in range(1, len(samples))],
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    (out_dir / "synth_params.json").write_text(params.model_dump_json(indent=2))
    logger.info(f"Wrote synthetic dataset with {params.queries} queries to {out_dir}")
    return manifest_path
