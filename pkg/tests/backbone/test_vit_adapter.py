"""
Tests for the vision transformer adapter, using a tiny stand-in model.
"""
import numpy as np
import pytest
import torch
from torch import nn

from oneshot_landmarks.backbone import extract_features
from oneshot_landmarks.backbone.vit_adapter import ViTFeatureAdapter
from oneshot_landmarks.errors import BackboneError
from oneshot_landmarks.models.grids import ImageGrid
from oneshot_landmarks.models.specs import BackboneSpec


class _Attention(nn.Module):
    def __init__(self, dim):
        super().__init__()
        self.qkv = nn.Linear(dim, 3 * dim)

    def forward(self, x):
        _, _, v = self.qkv(x).chunk(3, dim=-1)
        return v


class _Block(nn.Module):
    def __init__(self, dim):
        super().__init__()
        self.attn = _Attention(dim)

    def forward(self, x):
        return x + self.attn(x)


class TinyViT(nn.Module):
    """Class token plus overlapping patch tokens through two blocks."""

    def __init__(self, dim=6, depth=2, patch=4, stride=2):
        super().__init__()
        self.patch_embed = nn.Conv2d(3, dim, kernel_size=patch, stride=stride)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, dim))
        self.blocks = nn.ModuleList(_Block(dim) for _ in range(depth))

    def forward(self, x):
        tokens = self.patch_embed(x).flatten(2).transpose(1, 2)
        x = torch.cat([self.cls_token.expand(tokens.shape[0], -1, -1), tokens], dim=1)
        for block in self.blocks:
            x = block(x)
        return x


class TestViTFeatureAdapter:
    """Hook-based descriptor capture."""

    def setup_method(self):
        torch.manual_seed(0)
        self.model = TinyViT()
        self.adapter = ViTFeatureAdapter(self.model, patch_size=4, stride=2)
        self.image = ImageGrid(pixels=np.random.default_rng(1).uniform(size=(16, 20)))

    def _block_input(self, layer):
        x = self.adapter._prepare(self.image)
        tokens = self.model.patch_embed(x).flatten(2).transpose(1, 2)
        x = torch.cat([self.model.cls_token.expand(1, -1, -1), tokens], dim=1)
        for block in self.model.blocks[:layer - 1]:
            x = block(x)
        return x

    def test_model_is_frozen(self):
        assert all(not p.requires_grad for p in self.model.parameters())
        assert not self.model.training

    def test_key_of_first_layer(self):
        out = self.adapter(self.image, 1, "key")
        assert tuple(out.shape) == (7, 9, 6)
        with torch.no_grad():
            expected = self.model.blocks[0].attn.qkv(self._block_input(1))[0, 1:, 6:12]
        assert torch.allclose(out.reshape(-1, 6), expected, atol=1e-6)

    def test_token_of_second_layer(self):
        out = self.adapter(self.image, 2, "token")
        with torch.no_grad():
            expected = self.model.blocks[1](self._block_input(2))[0, 1:]
        assert torch.allclose(out.reshape(-1, 6), expected, atol=1e-6)

    def test_heads_differ(self):
        query = self.adapter(self.image, 1, "query")
        value = self.adapter(self.image, 1, "value")
        assert not torch.allclose(query, value)

    def test_invalid_layer(self):
        with pytest.raises(BackboneError) as exc_info:
            self.adapter(self.image, 3, "key")
        assert exc_info.value.code == "invalid-layer"

    def test_through_extract_features(self):
        spec = BackboneSpec(kind="external-vit", patch_size=4, stride=2, layer=2, head="value")
        f = extract_features(self.image, spec, adapter=self.adapter)
        assert (f.dim, f.grid_h, f.grid_w) == (6, 7, 9)
        assert f.transform.scale == 2.0
        assert f.transform.offset == (1.5, 1.5)
