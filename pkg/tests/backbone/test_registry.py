"""
Tests for the external adapter registry.
"""
import numpy as np
import pytest
import torch

from oneshot_landmarks.backbone import (
    extract_features,
    register_external_adapter,
    registered_adapters,
    unregister_external_adapter,
)
from oneshot_landmarks.errors import BackboneError
from oneshot_landmarks.models.grids import ImageGrid
from oneshot_landmarks.models.specs import BackboneSpec


class TestRegistry:
    """Registering and resolving external descriptor providers."""

    def setup_method(self):
        self.image = ImageGrid(pixels=np.full((16, 24), 0.5))
        self.spec = BackboneSpec(kind="external-vit", model="test-fake", patch_size=8, stride=4)
        self.calls = []

    def teardown_method(self):
        unregister_external_adapter("test-fake")

    def _fake(self, image, layer, head):
        self.calls.append((layer, head))
        return np.ones((3, 5, 7), dtype=np.float64)

    def test_missing_adapter(self):
        with pytest.raises(BackboneError) as exc_info:
            extract_features(self.image, self.spec)
        assert exc_info.value.code == "no-backbone-adapter"

    def test_registered_adapter_is_used(self):
        register_external_adapter(self._fake, name="test-fake")
        assert "test-fake" in registered_adapters()
        f = extract_features(self.image, self.spec)
        assert (f.dim, f.grid_h, f.grid_w) == (7, 3, 5)
        assert f.data.dtype == torch.float32
        assert self.calls == [(9, "key")]

    def test_explicit_adapter_overrides_registry(self):
        f = extract_features(self.image, self.spec, adapter=self._fake)
        assert f.dim == 7

    def test_shape_mismatch(self):
        register_external_adapter(lambda image, layer, head: np.ones((2, 5, 7)), name="test-fake")
        with pytest.raises(BackboneError) as exc_info:
            extract_features(self.image, self.spec)
        assert exc_info.value.code == "adapter-shape-mismatch"

    def test_unregister(self):
        register_external_adapter(self._fake, name="test-fake")
        unregister_external_adapter("test-fake")
        assert "test-fake" not in registered_adapters()
