"""
Decoder training on the augmented template.

The global decoder learns on the fixed augmentation set at the downsampled resolution;
the local decoder learns on jittered full-resolution crops around each landmark. Backbone
features are computed without gradients and never change.
"""
import math
from typing import Callable, List, Optional, Tuple

import numpy as np
import torch
from pydantic import BaseModel, Field
from tqdm import tqdm

from oneshot_landmarks.backbone import DescriptorProvider, extract_features
from oneshot_landmarks.core import seeded_rng, snap_to_grid, to_feature_coords
from oneshot_landmarks.decoders import Decoder, decode_batch, init_decoder
from oneshot_landmarks.errors import TrainingError
from oneshot_landmarks.models.grids import ImageGrid, LandmarkSet
from oneshot_landmarks.models.specs import BackboneSpec, TrainConfig
from oneshot_landmarks.pipeline.augment import augment_template, sample_local_crop
from oneshot_landmarks.pipeline.imaging import downsample_short_side
from oneshot_landmarks.simloss import anchors_at, cosine_similarity_maps, training_loss
from oneshot_landmarks.utils.logger import Logger

logger = Logger(__name__)


class LossHistory(BaseModel):
    """Per-step training losses."""

    global_losses: List[float] = Field(default_factory=list)
    local_losses: List[float] = Field(default_factory=list)

    def rows(self) -> List[Tuple[str, int, float]]:
        """(stage, step, loss) rows in training order."""
        return [("global", i, v) for i, v in enumerate(self.global_losses)] + [
            ("local", i, v) for i, v in enumerate(self.local_losses)
        ]


class TrainResult(BaseModel):
    """Trained decoders and their loss history."""

    global_decoder: Decoder
    local_decoder: Decoder
    loss_history: LossHistory

    model_config = {"arbitrary_types_allowed": True}

    def __iter__(self):
        return iter((self.global_decoder, self.local_decoder, self.loss_history))


def _centers(points, height: int, width: int) -> List[Tuple[int, int]]:
    """Snapped (x, y) cells of points on a pixel-resolution map."""
    cells = [snap_to_grid(p, height, width) for p in points]
    return [(c.col, c.row) for c in cells]


def _optimize(
    decoder: Decoder,
    steps: int,
    cfg: TrainConfig,
    stage: str,
    batch_fn: Callable[[int], torch.Tensor],
) -> List[float]:
    """Run Adam on a loss produced per step; abort on a non-finite loss."""
    losses: List[float] = []
    if steps == 0:
        return losses
    optimizer = torch.optim.Adam(decoder.parameters(), lr=cfg.lr)
    decoder.train()
    progress = tqdm(range(steps), desc=f"{stage} decoder", disable=None if cfg.progress else True, leave=False)
    for step in progress:
        optimizer.zero_grad()
        loss = batch_fn(step)
        value = float(loss.detach())
        if not math.isfinite(value):
            raise TrainingError("training-diverged", f"{stage} loss became {value} at step {step}", step=step)
        loss.backward()
        optimizer.step()
        losses.append(value)
        if cfg.progress:
            progress.set_postfix(loss=f"{value:.5f}")
    decoder.eval()
    logger.info(f"Trained {stage} decoder for {steps} steps: loss {losses[0]:.5f} -> {losses[-1]:.5f}")
    return losses


def train_global_decoder(
    decoder: Decoder,
    template: ImageGrid,
    lms: LandmarkSet,
    backbone: BackboneSpec,
    cfg: TrainConfig,
    rng: np.random.Generator,
    adapter: Optional[DescriptorProvider] = None,
) -> List[float]:
    """
    Train the global decoder on the augmented, downsampled template.

    Returns:
        Loss per step
    """
    if cfg.iters_global == 0:
        return []
    small, to_original = downsample_short_side(template, cfg.short_side)
    small_lms = LandmarkSet(points=[to_feature_coords(p, to_original) for p in lms.points])
    samples = augment_template(small, small_lms, cfg)

    with torch.no_grad():
        maps = [extract_features(img, backbone, adapter) for img, _ in samples]
    features = torch.stack([m.data for m in maps])
    input_transform = maps[0].transform
    centers = torch.tensor([_centers(s_lms.points, small.height, small.width) for _, s_lms in samples])
    batch = min(cfg.batch, len(samples))

    def step_loss(step: int) -> torch.Tensor:
        chosen = torch.from_numpy(rng.choice(len(samples), size=batch, replace=False))
        decoded = decode_batch(decoder, features[chosen], input_transform, small.height, small.width)
        sims = cosine_similarity_maps(decoded, anchors_at(decoded, centers[chosen]))
        return training_loss(cfg.loss, sims, centers[chosen], cfg.sigma_global, cfg.contrastive_temperature)

    return _optimize(decoder, cfg.iters_global, cfg, "global", step_loss)


def train_local_decoder(
    decoder: Decoder,
    template: ImageGrid,
    lms: LandmarkSet,
    backbone: BackboneSpec,
    cfg: TrainConfig,
    rng: np.random.Generator,
    adapter: Optional[DescriptorProvider] = None,
) -> List[float]:
    """
    Train the local decoder on jittered crops, one landmark per crop.

    Returns:
        Loss per step
    """
    size = cfg.crop_size

    def step_loss(step: int) -> torch.Tensor:
        landmark_ids = rng.integers(0, lms.count, size=cfg.batch)
        crops = [sample_local_crop(template, lms, int(i), cfg, rng) for i in landmark_ids]
        with torch.no_grad():
            maps = [extract_features(crop, backbone, adapter) for crop, _ in crops]
        features = torch.stack([m.data for m in maps])
        centers = torch.tensor([_centers([p], size, size) for _, p in crops])
        decoded = decode_batch(decoder, features, maps[0].transform, size, size)
        sims = cosine_similarity_maps(decoded, anchors_at(decoded, centers))
        return training_loss(cfg.loss, sims, centers, cfg.sigma_local, cfg.contrastive_temperature)

    return _optimize(decoder, cfg.iters_local, cfg, "local", step_loss)


def train_decoders(
    template: ImageGrid,
    lms: LandmarkSet,
    backbone: BackboneSpec,
    cfg: TrainConfig,
    adapter: Optional[DescriptorProvider] = None,
) -> TrainResult:
    """
    Train both decoders from one annotated template.

    Args:
        template: Template image at original resolution
        lms: Template landmarks
        backbone: Frozen backbone selection
        cfg: Training schedule
        adapter: Explicit descriptor provider for external backbones

    Returns:
        Both decoders and the per-step loss history; deterministic for a fixed seed

    Raises:
        GeometryError: ``landmark-out-of-bounds``
        TrainingError: ``training-diverged`` with the failing step
    """
    lms.check_bounds(template)
    rng = seeded_rng(cfg.seed)

    in_dim = extract_features(downsample_short_side(template, cfg.short_side)[0], backbone, adapter).dim
    global_decoder = init_decoder("global", in_dim, cfg.decoder.out_dim, cfg.seed, cfg.decoder.hidden_dim)
    local_decoder = init_decoder("local", in_dim, cfg.decoder.out_dim, cfg.seed + 1, cfg.decoder.hidden_dim)

    history = LossHistory()
    history.global_losses = train_global_decoder(global_decoder, template, lms, backbone, cfg, rng, adapter)
    history.local_losses = train_local_decoder(local_decoder, template, lms, backbone, cfg, rng, adapter)
    global_decoder.eval()
    local_decoder.eval()
    return TrainResult(global_decoder=global_decoder, local_decoder=local_decoder, loss_history=history)
