"""
Adapter exposing a frozen vision transformer as a descriptor provider.

The wrapped model must expose ``blocks`` (a sequence of transformer blocks, each with an
``attn.qkv`` linear projection) and produce tokens ``[class, patch_0, ..., patch_n]`` in
its forward pass. Overlapping stride is the model's business: ``from_torch_hub`` sets
the patch-embedding stride and a stride-aware positional-encoding interpolation.
"""
import math
import types
from typing import Sequence

import torch
import torch.nn.functional as F
from torch import nn

from oneshot_landmarks.errors import BackboneError
from oneshot_landmarks.models.grids import ImageGrid
from oneshot_landmarks.utils.logger import Logger

logger = Logger(__name__)

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
_QKV_INDEX = {"query": 0, "key": 1, "value": 2}


def freeze_module(model: nn.Module) -> nn.Module:
    """Disable gradients and switch to eval mode."""
    for param in model.parameters():
        param.requires_grad = False
    return model.eval()


class ViTFeatureAdapter:
    """
    Reads key/query/value projections or block outputs from a frozen ViT.
    """

    def __init__(
        self,
        model: nn.Module,
        patch_size: int = 8,
        stride: int = 4,
        device: str = "cpu",
        mean: Sequence[float] = IMAGENET_MEAN,
        std: Sequence[float] = IMAGENET_STD,
    ):
        """
        Args:
            model: Vision transformer exposing ``blocks[i].attn.qkv``
            patch_size: Patch side the model was configured with
            stride: Patch stride the model was configured with
            device: Torch device for the forward pass
            mean: Per-channel normalization mean
            std: Per-channel normalization std
        """
        self.model = freeze_module(model).to(device)
        self.patch_size = patch_size
        self.stride = stride
        self.device = device
        self._mean = torch.tensor(mean, dtype=torch.float32).view(1, 3, 1, 1)
        self._std = torch.tensor(std, dtype=torch.float32).view(1, 3, 1, 1)

    @classmethod
    def from_torch_hub(
        cls,
        repo: str = "facebookresearch/dino:main",
        name: str = "dino_vits8",
        stride: int = 4,
        device: str = "cpu",
    ) -> "ViTFeatureAdapter":
        """
        Load a hub model and reconfigure its patch embedding for overlapping patches.

        Weights are fetched by torch hub on first use.
        """
        model = torch.hub.load(repo, name)
        patch_size = model.patch_embed.patch_size
        patch_size = patch_size[0] if isinstance(patch_size, (tuple, list)) else int(patch_size)
        model.patch_embed.proj.stride = (stride, stride)
        model.interpolate_pos_encoding = types.MethodType(_strided_pos_encoding(patch_size, stride), model)
        logger.info(f"Loaded {repo}:{name} with patch {patch_size} and stride {stride}")
        return cls(model, patch_size=patch_size, stride=stride, device=device)

    def _prepare(self, image: ImageGrid) -> torch.Tensor:
        x = image.to_tensor().repeat(1, 3, 1, 1)
        return ((x - self._mean) / self._std).to(self.device)

    def __call__(self, image: ImageGrid, layer: int, head: str) -> torch.Tensor:
        """
        Descriptors of one image.

        Args:
            image: Source image
            layer: 1-based block index
            head: ``key``, ``query``, ``value`` or ``token``

        Returns:
            (grid_h, grid_w, D) float32 tensor
        """
        blocks = self.model.blocks
        if not 1 <= layer <= len(blocks):
            raise BackboneError("invalid-layer", f"layer {layer} outside 1..{len(blocks)}")
        block = blocks[layer - 1]
        captured = {}

        def _capture(module, inputs, output):
            captured["out"] = output

        target = block if head == "token" else block.attn.qkv
        hook = target.register_forward_hook(_capture)
        try:
            with torch.no_grad():
                self.model(self._prepare(image))
        finally:
            hook.remove()

        out = captured["out"]
        if head != "token":
            batch, tokens, width = out.shape
            out = out.reshape(batch, tokens, 3, width // 3)[:, :, _QKV_INDEX[head], :]

        grid_h = (image.height - self.patch_size) // self.stride + 1
        grid_w = (image.width - self.patch_size) // self.stride + 1
        patches = out[0, 1:, :]
        if patches.shape[0] != grid_h * grid_w:
            raise BackboneError(
                "adapter-shape-mismatch",
                f"model produced {patches.shape[0]} patch tokens, expected {grid_h * grid_w}",
            )
        return patches.reshape(grid_h, grid_w, -1).to(device="cpu", dtype=torch.float32)


def _strided_pos_encoding(patch_size: int, stride: int):
    """Positional-encoding interpolation that accounts for overlapping patches."""

    def interpolate_pos_encoding(self, x, w, h):
        patch_count = x.shape[1] - 1
        stored = self.pos_embed.shape[1] - 1
        if patch_count == stored and w == h:
            return self.pos_embed
        class_pos = self.pos_embed[:, 0]
        patch_pos = self.pos_embed[:, 1:]
        dim = x.shape[-1]
        grid_w = 1 + (w - patch_size) // stride
        grid_h = 1 + (h - patch_size) // stride
        side = int(math.sqrt(stored))
        patch_pos = F.interpolate(
            patch_pos.reshape(1, side, side, dim).permute(0, 3, 1, 2),
            size=(grid_h, grid_w),
            mode="bicubic",
            align_corners=False,
        )
        patch_pos = patch_pos.permute(0, 2, 3, 1).reshape(1, -1, dim)
        return torch.cat((class_pos.unsqueeze(0), patch_pos), dim=1)

    return interpolate_pos_encoding
