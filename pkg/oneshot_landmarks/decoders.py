"""
Trainable global and local feature decoders.

Both decoders restore resolution lost to patch encoding with two x2 stages and end with a
geometry-exact bilinear resample onto the requested pixel frame. The global decoder uses
bilinear upsampling followed by 3x3 convolutions; the local decoder uses transposed
convolutions (kernel 4, stride 2). ReLU sits between the stages only, so output
descriptors stay signed.
"""
import json
import math
from pathlib import Path
from typing import List, Literal, Optional, Union

import torch
import torch.nn.functional as F
from safetensors import safe_open
from safetensors.torch import save_file
from torch import nn

from oneshot_landmarks.core import seeded_torch_generator, to_feature_coords
from oneshot_landmarks.errors import DecoderError
from oneshot_landmarks.models.geometry import CoordTransform, Point
from oneshot_landmarks.models.grids import FeatureMap
from oneshot_landmarks.utils.logger import Logger

logger = Logger(__name__)

DecoderStage = Literal["global", "local"]

# Output index j of a x2 stage sits over input index j/2 - 0.25.
UPSAMPLE_STAGE = CoordTransform(scale=0.5, offset=(-0.25, -0.25))


class _Decoder(nn.Module):
    """Shared bookkeeping for both decoder stages."""

    stage: DecoderStage = "global"

    def __init__(self, in_dim: int, out_dim: int, hidden_dim: Optional[int] = None, seed: int = 0):
        super().__init__()
        if in_dim < 1 or out_dim < 1:
            raise DecoderError("invalid-decoder-width", f"widths must be >= 1, got in={in_dim} out={out_dim}")
        self.in_dim = in_dim
        self.hidden_dim = hidden_dim or out_dim
        self.out_dim = out_dim
        self.seed = seed

    @property
    def widths(self) -> List[int]:
        """Channel widths [input, hidden, output]."""
        return [self.in_dim, self.hidden_dim, self.out_dim]

    def output_transform(self, input_transform: CoordTransform) -> CoordTransform:
        """Transform of the raw (pre-resample) decoder output into the input's image frame."""
        return UPSAMPLE_STAGE.compose(UPSAMPLE_STAGE).compose(input_transform)

    def reset_parameters(self) -> None:
        """Seeded fan-in uniform weights, zero biases."""
        generator = seeded_torch_generator(self.seed)
        with torch.no_grad():
            for module in self.modules():
                if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
                    weight = module.weight
                    # ConvTranspose2d stores (in, out, k, k), Conv2d (out, in, k, k)
                    in_axis = 0 if isinstance(module, nn.ConvTranspose2d) else 1
                    fan_in = weight.shape[in_axis] * weight.shape[2] * weight.shape[3]
                    bound = 1.0 / math.sqrt(fan_in)
                    sample = torch.rand(weight.shape, generator=generator, dtype=torch.float32)
                    weight.copy_((sample * 2.0 - 1.0) * bound)
                    if module.bias is not None:
                        module.bias.zero_()


class GlobalDecoder(_Decoder):
    """Two blocks of (bilinear x2 upsample, 3x3 convolution)."""

    stage: DecoderStage = "global"

    def __init__(self, in_dim: int, out_dim: int = 256, hidden_dim: Optional[int] = None, seed: int = 0):
        super().__init__(in_dim, out_dim, hidden_dim, seed)
        self.up = nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False)
        self.conv1 = nn.Conv2d(in_dim, self.hidden_dim, kernel_size=3, padding=1)
        self.conv2 = nn.Conv2d(self.hidden_dim, out_dim, kernel_size=3, padding=1)
        self.reset_parameters()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = F.relu(self.conv1(self.up(x)))
        return self.conv2(self.up(x))


class LocalDecoder(_Decoder):
    """Two transposed convolutions (kernel 4, stride 2, padding 1)."""

    stage: DecoderStage = "local"

    def __init__(self, in_dim: int, out_dim: int = 256, hidden_dim: Optional[int] = None, seed: int = 0):
        super().__init__(in_dim, out_dim, hidden_dim, seed)
        self.deconv1 = nn.ConvTranspose2d(in_dim, self.hidden_dim, kernel_size=4, stride=2, padding=1)
        self.deconv2 = nn.ConvTranspose2d(self.hidden_dim, out_dim, kernel_size=4, stride=2, padding=1)
        self.reset_parameters()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = F.relu(self.deconv1(x))
        return self.deconv2(x)


Decoder = Union[GlobalDecoder, LocalDecoder]
_STAGES = {"global": GlobalDecoder, "local": LocalDecoder}


def init_decoder(
    stage: DecoderStage,
    in_dim: int,
    out_dim: int = 256,
    seed: int = 0,
    hidden_dim: Optional[int] = None,
) -> Decoder:
    """
    Create a freshly initialized decoder.

    Two calls with equal arguments yield bit-identical parameters.

    Args:
        stage: ``global`` or ``local``
        in_dim: Backbone descriptor dimension
        out_dim: Output descriptor dimension
        seed: Initialization seed
        hidden_dim: Width of the first block (defaults to out_dim)

    Returns:
        The decoder module
    """
    if stage not in _STAGES:
        raise DecoderError("invalid-decoder-stage", f"unknown decoder stage '{stage}'")
    return _STAGES[stage](in_dim, out_dim=out_dim, hidden_dim=hidden_dim, seed=seed)


def resample_to_frame(
    x: torch.Tensor,
    transform: CoordTransform,
    target_h: int,
    target_w: int,
) -> torch.Tensor:
    """
    Bilinearly sample a grid at the integer pixel positions of a target frame.

    Args:
        x: (B, C, h, w) values on a grid
        transform: Maps the grid into the target frame
        target_h: Target rows
        target_w: Target columns

    Returns:
        (B, C, target_h, target_w), border values repeated outside the grid
    """
    batch, _, h, w = x.shape
    dx, dy = transform.offset
    cols = (torch.arange(target_w, dtype=x.dtype, device=x.device) - dx) / transform.scale
    rows = (torch.arange(target_h, dtype=x.dtype, device=x.device) - dy) / transform.scale
    gx = cols * (2.0 / (w - 1)) - 1.0 if w > 1 else torch.zeros_like(cols)
    gy = rows * (2.0 / (h - 1)) - 1.0 if h > 1 else torch.zeros_like(rows)
    grid = torch.stack(torch.meshgrid(gy, gx, indexing="ij")[::-1], dim=-1)
    grid = grid.unsqueeze(0).expand(batch, target_h, target_w, 2)
    return F.grid_sample(x, grid, mode="bilinear", padding_mode="border", align_corners=True)


def decode_batch(
    decoder: Decoder,
    features: torch.Tensor,
    input_transform: CoordTransform,
    target_h: int,
    target_w: int,
) -> torch.Tensor:
    """
    Decode a batch of backbone grids onto a pixel frame.

    Args:
        decoder: Global or local decoder
        features: (B, D, h, w) backbone descriptors sharing one transform
        input_transform: Grid-to-frame transform of the backbone descriptors
        target_h: Frame rows
        target_w: Frame columns

    Returns:
        (B, out_dim, target_h, target_w)
    """
    grid_h, grid_w = features.shape[-2:]
    if target_h < grid_h or target_w < grid_w:
        raise DecoderError(
            "invalid-upsample-target",
            f"target {target_h}x{target_w} is smaller than the input grid {grid_h}x{grid_w}",
        )
    param = next(decoder.parameters())
    decoded = decoder(features.to(dtype=param.dtype, device=param.device))
    return resample_to_frame(decoded, decoder.output_transform(input_transform), target_h, target_w)


def _decode(f: FeatureMap, p: Decoder, stage: DecoderStage, target_h: int, target_w: int) -> FeatureMap:
    if p.stage != stage:
        raise DecoderError("wrong-decoder-stage", f"expected a {stage} decoder, got {p.stage}")
    out = decode_batch(p, f.data.unsqueeze(0), f.transform, target_h, target_w)[0]
    return FeatureMap(data=out, transform=CoordTransform.identity())


def global_decode(f: FeatureMap, p: Decoder, target_h: int, target_w: int) -> FeatureMap:
    """
    Decode whole-image backbone features at the downsampled image size.

    Args:
        f: Backbone features of the downsampled image
        p: Global decoder
        target_h: Downsampled image height
        target_w: Downsampled image width

    Returns:
        target_h x target_w map with an identity transform into the downsampled image;
        differentiable with respect to the decoder parameters

    Raises:
        DecoderError: ``invalid-upsample-target`` when the target is smaller than the grid
    """
    return _decode(f, p, "global", target_h, target_w)


def local_decode(f: FeatureMap, p: Decoder, crop_h: int, crop_w: int) -> FeatureMap:
    """
    Decode crop backbone features at full crop resolution.

    Args:
        f: Backbone features of the crop
        p: Local decoder
        crop_h: Crop height
        crop_w: Crop width

    Returns:
        crop_h x crop_w map in crop coordinates
    """
    return _decode(f, p, "local", crop_h, crop_w)


def fuse_features(local: FeatureMap, global_region: FeatureMap) -> FeatureMap:
    """
    Add the corresponding global sub-window to a local feature map.

    The global region is bilinearly resized (corner-aligned) to the local map's size.

    Raises:
        DecoderError: ``fuse-dim-mismatch`` when channel counts differ
    """
    if local.dim != global_region.dim:
        raise DecoderError(
            "fuse-dim-mismatch",
            f"local map has {local.dim} channels, global region has {global_region.dim}",
        )
    region = global_region.data
    if (global_region.grid_h, global_region.grid_w) != (local.grid_h, local.grid_w):
        region = F.interpolate(
            region.unsqueeze(0),
            size=(local.grid_h, local.grid_w),
            mode="bilinear",
            align_corners=True,
        )[0]
    return FeatureMap(data=local.data + region.to(local.data.dtype), transform=local.transform)


def extract_global_region(
    global_map: FeatureMap,
    crop_transform: CoordTransform,
    crop_h: int,
    crop_w: int,
    frame_transform: Optional[CoordTransform] = None,
) -> FeatureMap:
    """
    Cut the global feature sub-window that covers a crop.

    The window is sampled at the global map's native resolution with its first and last
    samples on the crop's corner pixels.

    Args:
        global_map: Decoded global features
        crop_transform: Maps crop pixels into the original image
        crop_h: Crop height
        crop_w: Crop width
        frame_transform: Maps the global map's frame (the downsampled image) into the
            original image; identity when the global map already lives there

    Returns:
        Feature map whose transform maps the window grid into crop coordinates
    """
    to_original = global_map.transform.compose(frame_transform or CoordTransform.identity())
    first = to_feature_coords(crop_transform.offset, to_original)
    last_corner = Point(
        crop_transform.offset[0] + (crop_w - 1) * crop_transform.scale,
        crop_transform.offset[1] + (crop_h - 1) * crop_transform.scale,
    )
    last = to_feature_coords(last_corner, to_original)

    n_w = max(2, int(round(last.x - first.x)) + 1)
    n_h = max(2, int(round(last.y - first.y)) + 1)
    data = global_map.data
    xs = torch.linspace(first.x, last.x, n_w, dtype=data.dtype, device=data.device)
    ys = torch.linspace(first.y, last.y, n_h, dtype=data.dtype, device=data.device)
    gx = xs * (2.0 / (global_map.grid_w - 1)) - 1.0 if global_map.grid_w > 1 else torch.zeros_like(xs)
    gy = ys * (2.0 / (global_map.grid_h - 1)) - 1.0 if global_map.grid_h > 1 else torch.zeros_like(ys)
    grid = torch.stack(torch.meshgrid(gy, gx, indexing="ij")[::-1], dim=-1).unsqueeze(0)
    region = F.grid_sample(data.unsqueeze(0), grid, mode="bilinear", padding_mode="border", align_corners=True)[0]

    step = (crop_w - 1) / (n_w - 1) if crop_w > 1 else 1.0
    return FeatureMap(data=region, transform=CoordTransform(scale=step, offset=(0.0, 0.0)))


def save_decoder(decoder: Decoder, path: Union[str, Path], config_digest: str = "") -> Path:
    """
    Write a decoder checkpoint.

    Args:
        decoder: Decoder to store
        path: Destination ``.safetensors`` file
        config_digest: Digest of the training configuration

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensors = {name: t.detach().cpu().contiguous() for name, t in decoder.state_dict().items()}
    metadata = {
        "stage": decoder.stage,
        "widths": json.dumps(decoder.widths),
        "out_dim": str(decoder.out_dim),
        "seed": str(decoder.seed),
        "config_digest": config_digest,
    }
    save_file(tensors, str(path), metadata=metadata)
    logger.debug(f"Saved {decoder.stage} decoder to {path}")
    return path


def load_decoder(path: Union[str, Path]) -> Decoder:
    """
    Read a decoder checkpoint written by ``save_decoder``.

    Raises:
        DecoderError: ``checkpoint-missing`` or ``checkpoint-invalid``
    """
    path = Path(path)
    if not path.exists():
        raise DecoderError("checkpoint-missing", f"decoder checkpoint not found: {path}")
    with safe_open(str(path), framework="pt") as handle:
        metadata = dict(handle.metadata() or {})
        tensors = {key: handle.get_tensor(key) for key in handle.keys()}
    try:
        in_dim, hidden_dim, out_dim = json.loads(metadata["widths"])
        decoder = init_decoder(
            metadata["stage"], in_dim, out_dim=out_dim, seed=int(metadata["seed"]), hidden_dim=hidden_dim
        )
        decoder = decoder.to(dtype=next(iter(tensors.values())).dtype)
        decoder.load_state_dict(tensors, strict=True)
    except (KeyError, ValueError, RuntimeError, StopIteration) as e:
        raise DecoderError("checkpoint-invalid", f"{path} is not a valid decoder checkpoint: {e}")
    return decoder


def checkpoint_digest(path: Union[str, Path]) -> str:
    """Training-config digest recorded in a checkpoint."""
    with safe_open(str(path), framework="pt") as handle:
        return (handle.metadata() or {}).get("config_digest", "")
