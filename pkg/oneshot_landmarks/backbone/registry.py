"""
Backbone factory and external adapter registry.

Adapters are registered once at startup, before any concurrent extraction.
"""
from typing import Any, Dict, List, Optional, Protocol

import numpy as np
import torch

from oneshot_landmarks.backbone.geometry import grid_geometry
from oneshot_landmarks.backbone.synthetic import noisy_descriptors, positional_descriptors
from oneshot_landmarks.errors import BackboneError
from oneshot_landmarks.models.grids import FeatureMap, ImageGrid
from oneshot_landmarks.models.specs import BackboneSpec
from oneshot_landmarks.utils.logger import Logger

logger = Logger(__name__)

DEFAULT_ADAPTER = "dino-s"


class DescriptorProvider(Protocol):
    """Maps (image, 1-based layer, head) to a (grid_h, grid_w, D) descriptor grid."""

    def __call__(self, image: ImageGrid, layer: int, head: str) -> Any:
        ...


_ADAPTERS: Dict[str, DescriptorProvider] = {}


def register_external_adapter(loader: DescriptorProvider, name: str = DEFAULT_ADAPTER) -> None:
    """
    Register a descriptor provider for ``external-vit`` backbones.

    Args:
        loader: Callable returning a (grid_h, grid_w, D) grid for (image, layer, head)
        name: Adapter name matched against ``BackboneSpec.model``
    """
    if name in _ADAPTERS:
        logger.warning(f"Replacing registered backbone adapter '{name}'")
    _ADAPTERS[name] = loader
    logger.debug(f"Registered backbone adapter '{name}'")


def unregister_external_adapter(name: str = DEFAULT_ADAPTER) -> None:
    """Remove a registered adapter if present."""
    _ADAPTERS.pop(name, None)


def registered_adapters() -> List[str]:
    """Names of registered adapters, sorted."""
    return sorted(_ADAPTERS)


def _as_descriptor_tensor(raw: Any) -> torch.Tensor:
    """Convert adapter output to a float32 CPU tensor."""
    if isinstance(raw, torch.Tensor):
        return raw.detach().to(device="cpu", dtype=torch.float32)
    return torch.from_numpy(np.asarray(raw, dtype=np.float32).copy())


def extract_features(img: ImageGrid, spec: BackboneSpec, adapter: Optional[DescriptorProvider] = None) -> FeatureMap:
    """
    Extract frozen dense features from an image.

    Args:
        img: Source image (never modified)
        spec: Backbone specification
        adapter: Explicit provider overriding the registry for ``external-vit``

    Returns:
        Feature map on the patch grid with its grid-to-image transform

    Raises:
        BackboneError: ``image-too-small``, ``no-backbone-adapter`` or ``adapter-shape-mismatch``
    """
    geometry = grid_geometry(img.height, img.width, spec)

    if spec.kind == "synthetic-positional":
        data = positional_descriptors(img, spec, geometry)
    elif spec.kind == "synthetic-noisy":
        data = noisy_descriptors(img, spec, geometry)
    else:
        loader = adapter or _ADAPTERS.get(spec.model)
        if loader is None:
            raise BackboneError(
                "no-backbone-adapter",
                f"no adapter registered for model '{spec.model}'; call register_external_adapter first",
            )
        with torch.no_grad():
            grid = _as_descriptor_tensor(loader(img, spec.layer, spec.head))
        expected = (geometry.grid_h, geometry.grid_w)
        if grid.dim() != 3 or tuple(grid.shape[:2]) != expected:
            raise BackboneError(
                "adapter-shape-mismatch",
                f"adapter returned shape {tuple(grid.shape)}, expected ({expected[0]}, {expected[1]}, D)",
            )
        data = grid.permute(2, 0, 1).contiguous()

    return FeatureMap(data=data, transform=geometry.transform)
