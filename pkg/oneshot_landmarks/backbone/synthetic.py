"""
Deterministic synthetic backbones for tests and desk-scale experiments.

Descriptors encode each receptive-field center with low-frequency sinusoids, measured
relative to the image's intensity-weighted centroid, followed by the mean and variance of
the patch intensities. The vector is L2-normalized. Measuring positions from the centroid
keeps the encoding translation-equivariant for content that stays inside the frame.
"""
import hashlib
import math

import torch
import torch.nn.functional as F

from oneshot_landmarks.core import image_checksum
from oneshot_landmarks.models.grids import ImageGrid
from oneshot_landmarks.models.specs import BackboneSpec, PatchGridGeometry


def _centroid(pixels: torch.Tensor) -> tuple:
    """Intensity-weighted (x, y) centroid; geometric center for a blank image."""
    h, w = pixels.shape
    total = pixels.sum()
    if float(total) <= 0.0:
        return (w - 1) / 2.0, (h - 1) / 2.0
    xs = torch.arange(w, dtype=pixels.dtype)
    ys = torch.arange(h, dtype=pixels.dtype)
    cx = float((pixels.sum(dim=0) * xs).sum() / total)
    cy = float((pixels.sum(dim=1) * ys).sum() / total)
    return cx, cy


def positional_descriptors(image: ImageGrid, spec: BackboneSpec, geometry: PatchGridGeometry) -> torch.Tensor:
    """
    Synthetic-positional descriptors.

    Args:
        image: Source image
        spec: Backbone specification (``dim`` = 8 * octaves + 2)
        geometry: Patch grid of ``image`` under ``spec``

    Returns:
        (D, grid_h, grid_w) float32 tensor of unit vectors
    """
    pixels = torch.from_numpy(image.pixels.astype("float64"))
    batch = pixels.unsqueeze(0).unsqueeze(0)
    mean = F.avg_pool2d(batch, spec.patch_size, stride=spec.stride)[0, 0]
    mean_sq = F.avg_pool2d(batch * batch, spec.patch_size, stride=spec.stride)[0, 0]
    var = torch.clamp(mean_sq - mean * mean, min=0.0)

    cx, cy = _centroid(pixels)
    scale = geometry.transform.scale
    offset_x, offset_y = geometry.transform.offset
    cols = torch.arange(geometry.grid_w, dtype=torch.float64) * scale + offset_x
    rows = torch.arange(geometry.grid_h, dtype=torch.float64) * scale + offset_y
    u = ((cols - cx) / image.width).unsqueeze(0).expand(geometry.grid_h, geometry.grid_w)
    v = ((rows - cy) / image.height).unsqueeze(1).expand(geometry.grid_h, geometry.grid_w)

    channels = []
    octaves = (spec.dim - 2) // 8
    for octave in range(octaves):
        frequency = 2.0 * math.pi * (2 ** octave)
        for direction in (u, v, u + v, u - v):
            channels.append(torch.sin(frequency * direction))
            channels.append(torch.cos(frequency * direction))
    channels.append(mean)
    channels.append(var)

    descriptors = torch.stack(channels, dim=0)
    descriptors = descriptors / descriptors.norm(dim=0, keepdim=True)
    return descriptors.to(torch.float32)


def _noise_seed(seed: int, checksum: str) -> int:
    """Per-image seed derived from the spec seed and the image content."""
    digest = hashlib.sha256(f"{seed}:{checksum}".encode()).hexdigest()
    return int(digest[:15], 16)


def noisy_descriptors(image: ImageGrid, spec: BackboneSpec, geometry: PatchGridGeometry) -> torch.Tensor:
    """
    Synthetic-noisy descriptors: positional descriptors plus a frozen Gaussian perturbation.

    The perturbation has per-component standard deviation ``noise_eps / sqrt(D)`` and is
    seeded by ``(spec.seed, image checksum)``, so repeated calls are bit-identical.

    Returns:
        (D, grid_h, grid_w) float32 tensor
    """
    base = positional_descriptors(image, spec, geometry)
    generator = torch.Generator()
    generator.manual_seed(_noise_seed(spec.seed, image_checksum(image)))
    noise = torch.randn(base.shape, generator=generator, dtype=torch.float64)
    noise = noise * (spec.noise_eps / math.sqrt(spec.dim))
    return (base.to(torch.float64) + noise).to(torch.float32)
