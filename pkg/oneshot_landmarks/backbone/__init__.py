"""
Frozen dense-feature backbones.
"""
from oneshot_landmarks.backbone.geometry import grid_geometry
from oneshot_landmarks.backbone.registry import (
    DEFAULT_ADAPTER,
    DescriptorProvider,
    extract_features,
    register_external_adapter,
    registered_adapters,
    unregister_external_adapter,
)

__all__ = [
    "DEFAULT_ADAPTER",
    "DescriptorProvider",
    "extract_features",
    "grid_geometry",
    "register_external_adapter",
    "registered_adapters",
    "unregister_external_adapter",
]
