"""
Similarity maps, Gaussian similarity targets and the training losses.

The distance-aware loss supervises cosine-similarity maps (anchored at the landmark's own
descriptor) with a 2D Gaussian centered on the landmark. The contrastive and one-hot MSE
losses are kept as ablation baselines.
"""
from typing import Optional, Sequence, Tuple, Union

import torch
import torch.nn.functional as F

from oneshot_landmarks.core import snap_to_grid
from oneshot_landmarks.errors import SimilarityError
from oneshot_landmarks.models.geometry import GridIndex
from oneshot_landmarks.models.grids import FeatureMap, SimilarityMap
from oneshot_landmarks.models.specs import GaussianTargetSpec, LossKind

EPS = 1e-8
DEFAULT_TEMPERATURE = 0.07

MapLike = Union[SimilarityMap, torch.Tensor]


def _safe_norm(x: torch.Tensor, dim: int) -> torch.Tensor:
    # clamp before sqrt keeps the gradient finite at zero vectors
    return torch.sqrt((x * x).sum(dim=dim).clamp_min(EPS * EPS))


def cosine_similarity_map(f: FeatureMap, anchor: torch.Tensor, index: int = 0) -> SimilarityMap:
    """
    Cosine similarity of every descriptor in a map to an anchor vector.

    Args:
        f: Feature map, (D, H, W)
        anchor: D-dim anchor descriptor
        index: Landmark index recorded on the result

    Returns:
        Similarity map with values in [-1, 1]; zero descriptors map to 0

    Raises:
        SimilarityError: ``zero-anchor`` or ``anchor-dim-mismatch``
    """
    anchor = anchor.to(dtype=f.data.dtype).reshape(-1)
    if anchor.shape[0] != f.dim:
        raise SimilarityError("anchor-dim-mismatch", f"anchor has {anchor.shape[0]} dims, map has {f.dim}")
    if not bool((anchor != 0).any()):
        raise SimilarityError("zero-anchor", "anchor descriptor has zero norm")
    dots = torch.einsum("chw,c->hw", f.data, anchor)
    denom = _safe_norm(f.data, dim=0) * _safe_norm(anchor, dim=0)
    return SimilarityMap(values=(dots / denom).clamp(-1.0, 1.0), anchor=index)


def cosine_similarity_maps(features: torch.Tensor, anchors: torch.Tensor) -> torch.Tensor:
    """
    Batched cosine maps.

    Args:
        features: (B, C, H, W)
        anchors: (B, N, C)

    Returns:
        (B, N, H, W) similarities in [-1, 1]
    """
    dots = torch.einsum("bchw,bnc->bnhw", features, anchors)
    denom = _safe_norm(features, dim=1).unsqueeze(1) * _safe_norm(anchors, dim=2)[:, :, None, None]
    return (dots / denom).clamp(-1.0, 1.0)


def anchors_at(features: torch.Tensor, centers: torch.Tensor) -> torch.Tensor:
    """
    Gather descriptors at integer grid positions.

    Args:
        features: (B, C, H, W)
        centers: (B, N, 2) integer (x, y) positions

    Returns:
        (B, N, C)
    """
    batch = torch.arange(features.shape[0], device=features.device)[:, None]
    xs = centers[..., 0].long()
    ys = centers[..., 1].long()
    return features.permute(0, 2, 3, 1)[batch, ys, xs]


def gaussian_target_map(h: int, w: int, spec: GaussianTargetSpec, index: int = 0) -> SimilarityMap:
    """
    Gaussian ground-truth similarity centered on a landmark.

    The center is snapped to the nearest grid cell, so the peak value is exactly 1.

    Args:
        h: Map rows
        w: Map columns
        spec: Sigma (grid units) and center (x, y)
        index: Landmark index recorded on the result

    Raises:
        SimilarityError: ``center-out-of-bounds``
    """
    cx, cy = spec.center
    if not (0.0 <= cx <= w - 1 and 0.0 <= cy <= h - 1):
        raise SimilarityError(
            "center-out-of-bounds",
            f"center ({cx}, {cy}) lies outside a {w}x{h} map",
        )
    snapped = snap_to_grid(spec.center, h, w)
    centers = torch.tensor([[[snapped.col, snapped.row]]], dtype=torch.float64)
    values = gaussian_target_maps(h, w, centers, spec.sigma, dtype=torch.float64)[0, 0]
    return SimilarityMap(values=values, anchor=index)


def gaussian_target_maps(
    h: int,
    w: int,
    centers: torch.Tensor,
    sigma: float,
    dtype: torch.dtype = torch.float32,
) -> torch.Tensor:
    """
    Batched Gaussian targets.

    Args:
        h: Map rows
        w: Map columns
        centers: (B, N, 2) (x, y) positions in grid units
        sigma: Standard deviation in grid units

    Returns:
        (B, N, h, w) values in (0, 1]
    """
    centers = centers.to(torch.float64)
    xs = torch.arange(w, dtype=torch.float64)[None, None, None, :]
    ys = torch.arange(h, dtype=torch.float64)[None, None, :, None]
    dx2 = (xs - centers[..., 0, None, None]) ** 2
    dy2 = (ys - centers[..., 1, None, None]) ** 2
    return torch.exp(-(dx2 + dy2) / (2.0 * sigma * sigma)).to(dtype)


def onehot_target_maps(h: int, w: int, centers: torch.Tensor, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """(B, N, h, w) maps with 1 at each integer center and 0 elsewhere."""
    batch, count = centers.shape[:2]
    maps = torch.zeros(batch, count, h, w, dtype=dtype)
    b = torch.arange(batch)[:, None].expand(batch, count)
    n = torch.arange(count)[None, :].expand(batch, count)
    maps[b, n, centers[..., 1].long(), centers[..., 0].long()] = 1.0
    return maps


def _values(m: MapLike) -> torch.Tensor:
    return m.values if isinstance(m, SimilarityMap) else m


def similarity_mse(s: MapLike, y: MapLike) -> torch.Tensor:
    """
    Mean squared error between a similarity map and its target.

    Raises:
        SimilarityError: ``map-shape-mismatch``
    """
    s, y = _values(s), _values(y)
    if s.shape != y.shape:
        raise SimilarityError("map-shape-mismatch", f"prediction {tuple(s.shape)} vs target {tuple(y.shape)}")
    return ((s - y.to(s.dtype)) ** 2).mean()


def distance_aware_loss(
    preds: Sequence[Tuple[Optional[MapLike], Optional[MapLike]]],
    targets: Sequence[Tuple[Optional[MapLike], Optional[MapLike]]],
) -> torch.Tensor:
    """
    Distance-aware similarity loss.

    ``(1/N) * sum_i [MSE(S_i^G, Y_i^G) + MSE(S_i^L, Y_i^L)]``. A ``None`` stage in a pair is
    left out, which is how single-stage training uses it.

    Args:
        preds: Per-landmark (global, local) similarity maps
        targets: Per-landmark (global, local) Gaussian targets

    Returns:
        Scalar loss tensor

    Raises:
        SimilarityError: ``map-shape-mismatch`` or ``landmark-count-mismatch``
    """
    if len(preds) != len(targets) or not preds:
        raise SimilarityError(
            "landmark-count-mismatch",
            f"{len(preds)} prediction pairs for {len(targets)} target pairs",
        )
    total = None
    for (s_g, s_l), (y_g, y_l) in zip(preds, targets):
        for s, y in ((s_g, y_g), (s_l, y_l)):
            if s is None and y is None:
                continue
            if s is None or y is None:
                raise SimilarityError("map-shape-mismatch", "prediction and target stages differ")
            term = similarity_mse(s, y)
            total = term if total is None else total + term
    if total is None:
        return torch.zeros((), dtype=torch.float64)
    return total / len(preds)


def _check_target(target_pos: GridIndex, h: int, w: int) -> None:
    if not (0 <= target_pos.row < h and 0 <= target_pos.col < w):
        raise SimilarityError(
            "target-out-of-bounds",
            f"target (row {target_pos.row}, col {target_pos.col}) lies outside a {h}x{w} map",
        )


def contrastive_loss_baseline(
    f: FeatureMap,
    target_pos: GridIndex,
    temperature: float = DEFAULT_TEMPERATURE,
) -> torch.Tensor:
    """
    InfoNCE-style baseline: every other cell of the map is a negative.

    Returns:
        ``-log softmax(cos / temperature)`` at the target cell
    """
    _check_target(target_pos, f.grid_h, f.grid_w)
    s = cosine_similarity_map(f, f.vector_at(target_pos))
    logits = s.values.reshape(-1) / temperature
    return -F.log_softmax(logits, dim=0)[target_pos.row * f.grid_w + target_pos.col]


def onehot_mse_loss_baseline(s: SimilarityMap, target_pos: GridIndex) -> torch.Tensor:
    """MSE against a map that is 1 at the target cell and 0 elsewhere."""
    h, w = s.shape
    _check_target(target_pos, h, w)
    onehot = torch.zeros(h, w, dtype=s.values.dtype)
    onehot[target_pos.row, target_pos.col] = 1.0
    return similarity_mse(s, onehot)


def training_loss(
    kind: LossKind,
    maps: torch.Tensor,
    centers: torch.Tensor,
    sigma: float,
    temperature: float = DEFAULT_TEMPERATURE,
) -> torch.Tensor:
    """
    Batched single-stage loss used by the trainer.

    Args:
        kind: ``distance-aware``, ``contrastive`` or ``onehot-mse``
        maps: (B, N, H, W) cosine maps anchored at each landmark's own descriptor
        centers: (B, N, 2) integer (x, y) landmark cells
        sigma: Gaussian standard deviation in grid units
        temperature: Contrastive softmax temperature

    Returns:
        Scalar loss averaged over batch and landmarks
    """
    _, _, h, w = maps.shape
    if kind == "distance-aware":
        return ((maps - gaussian_target_maps(h, w, centers, sigma, dtype=maps.dtype)) ** 2).mean()
    if kind == "onehot-mse":
        return ((maps - onehot_target_maps(h, w, centers, dtype=maps.dtype)) ** 2).mean()
    if kind == "contrastive":
        logits = maps.flatten(2) / temperature
        flat_index = (centers[..., 1].long() * w + centers[..., 0].long()).to(maps.device)
        log_probs = F.log_softmax(logits, dim=2)
        return -log_probs.gather(2, flat_index.unsqueeze(-1)).mean()
    raise SimilarityError("unknown-loss", f"unknown loss kind '{kind}'")

