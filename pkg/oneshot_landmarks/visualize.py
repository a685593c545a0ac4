"""
Static PNG output: landmark overlays and similarity heatmaps.
"""
from pathlib import Path
from typing import List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from oneshot_landmarks.core import PointLike  # noqa: E402
from oneshot_landmarks.models.grids import ImageGrid, SimilarityMap  # noqa: E402


def plot_landmarks_on_image(
    image: ImageGrid,
    predicted: Sequence[PointLike],
    path: Union[str, Path],
    ground_truth: Optional[Sequence[PointLike]] = None,
    title: Optional[str] = None,
) -> Path:
    """
    Save an overlay with predictions in red and ground truth in green.

    Args:
        image: Background image
        predicted: Predicted (x, y) points
        path: Output PNG
        ground_truth: Optional true (x, y) points
        title: Optional figure title

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 6 * image.height / image.width))
    ax.imshow(image.pixels, cmap="gray", vmin=0.0, vmax=1.0)
    if ground_truth is not None:
        ax.scatter([p[0] for p in ground_truth], [p[1] for p in ground_truth], s=24, c="lime", marker="o", label="ground truth")
    ax.scatter([p[0] for p in predicted], [p[1] for p in predicted], s=24, c="red", marker="x", label="predicted")
    for i, p in enumerate(predicted):
        ax.annotate(str(i), (p[0], p[1]), color="yellow", fontsize=7, xytext=(3, 3), textcoords="offset points")
    if title:
        ax.set_title(title)
    ax.set_axis_off()
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_similarity_maps(
    maps: List[SimilarityMap],
    out_dir: Union[str, Path],
    prefix: str = "similarity",
) -> List[Path]:
    """
    Save one heatmap PNG per landmark, named ``<prefix>_<index>.png``.

    Returns:
        The written paths
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for sim in maps:
        fig, ax = plt.subplots(figsize=(5, 5 * sim.shape[0] / sim.shape[1]))
        im = ax.imshow(sim.values.detach().cpu().numpy(), cmap="jet", vmin=-1.0, vmax=1.0)
        fig.colorbar(im, ax=ax, fraction=0.046)
        ax.set_title(f"landmark {sim.anchor}")
        ax.set_axis_off()
        path = out_dir / f"{prefix}_{sim.anchor:02d}.png"
        fig.savefig(path, dpi=100, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
    return paths
