"""
Descriptor interchange files for precomputed external features.

A file is a safetensors container holding one float32 tensor ``descriptors`` of shape
(grid_h, grid_w, D) and string metadata, in this order: ``format_version``, ``grid_h``,
``grid_w``, ``dim``, ``scale``, ``offset_x``, ``offset_y``, ``checksum``. See
docs/descriptor_format.md.
"""
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import torch
from safetensors import safe_open
from safetensors.torch import save_file

from oneshot_landmarks.core import image_checksum
from oneshot_landmarks.errors import BackboneError
from oneshot_landmarks.models.geometry import CoordTransform
from oneshot_landmarks.models.grids import FeatureMap, ImageGrid

FORMAT_VERSION = "1"
TENSOR_KEY = "descriptors"


def save_descriptor_file(path: Union[str, Path], features: FeatureMap, checksum: str) -> Path:
    """
    Write a feature map as a descriptor interchange file.

    Args:
        path: Destination file
        features: Feature map to store
        checksum: ``image_checksum`` of the source image

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = features.data.detach().to(torch.float32).permute(1, 2, 0).contiguous()
    metadata = {
        "format_version": FORMAT_VERSION,
        "grid_h": str(features.grid_h),
        "grid_w": str(features.grid_w),
        "dim": str(features.dim),
        "scale": repr(features.transform.scale),
        "offset_x": repr(features.transform.offset[0]),
        "offset_y": repr(features.transform.offset[1]),
        "checksum": checksum,
    }
    save_file({TENSOR_KEY: grid}, str(path), metadata=metadata)
    return path


def load_descriptor_file(path: Union[str, Path]) -> Tuple[FeatureMap, Dict[str, str]]:
    """
    Read a descriptor interchange file.

    Returns:
        The feature map and the raw metadata

    Raises:
        BackboneError: ``descriptor-file-invalid`` for missing keys or inconsistent shapes
    """
    path = Path(path)
    if not path.exists():
        raise BackboneError("descriptor-file-missing", f"descriptor file not found: {path}")
    with safe_open(str(path), framework="pt") as handle:
        metadata = dict(handle.metadata() or {})
        if TENSOR_KEY not in handle.keys():
            raise BackboneError("descriptor-file-invalid", f"{path} has no '{TENSOR_KEY}' tensor")
        grid = handle.get_tensor(TENSOR_KEY)

    try:
        shape = (int(metadata["grid_h"]), int(metadata["grid_w"]), int(metadata["dim"]))
        transform = CoordTransform(
            scale=float(metadata["scale"]),
            offset=(float(metadata["offset_x"]), float(metadata["offset_y"])),
        )
    except (KeyError, ValueError) as e:
        raise BackboneError("descriptor-file-invalid", f"{path} has bad metadata: {e}")
    if tuple(grid.shape) != shape:
        raise BackboneError(
            "descriptor-file-invalid",
            f"{path} declares shape {shape} but stores {tuple(grid.shape)}",
        )
    return FeatureMap(data=grid.permute(2, 0, 1).contiguous(), transform=transform), metadata


class PrecomputedDescriptorAdapter:
    """
    Serves descriptor files from a directory as an external adapter.

    Files are looked up by source-image checksum, first as
    ``<checksum>_L<layer>_<head>.safetensors`` and then as ``<checksum>.safetensors``.
    """

    def __init__(self, directory: Union[str, Path]):
        """
        Args:
            directory: Folder holding descriptor files
        """
        self.directory = Path(directory)

    def _find(self, checksum: str, layer: int, head: str) -> Optional[Path]:
        for name in (f"{checksum}_L{layer}_{head}.safetensors", f"{checksum}.safetensors"):
            candidate = self.directory / name
            if candidate.exists():
                return candidate
        return None

    def __call__(self, image: ImageGrid, layer: int, head: str) -> torch.Tensor:
        checksum = image_checksum(image)
        path = self._find(checksum, layer, head)
        if path is None:
            raise BackboneError(
                "descriptor-file-missing",
                f"no descriptor file for image {checksum[:12]} (layer {layer}, head {head}) in {self.directory}",
            )
        features, metadata = load_descriptor_file(path)
        if metadata.get("checksum") != checksum:
            raise BackboneError("descriptor-file-invalid", f"{path} was computed for a different image")
        return features.data.permute(1, 2, 0)
