"""
Configuration models for backbones, decoders, losses, matching and training.
"""
from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator

from oneshot_landmarks.models.geometry import CoordTransform, Point

BackboneKind = Literal["synthetic-positional", "synthetic-noisy", "external-vit"]
HeadKind = Literal["key", "query", "value", "token"]
LossKind = Literal["distance-aware", "contrastive", "onehot-mse"]
MatchingKind = Literal["bdm", "argmax"]
StageKind = Literal["raw", "global", "global+local"]

SYNTHETIC_DIM = 34


class BackboneSpec(BaseModel):
    """Frozen dense-feature extractor selection."""

    kind: BackboneKind = Field(default="synthetic-positional", description="Backbone family")
    patch_size: int = Field(default=8, ge=1, description="Patch side in pixels")
    stride: int = Field(default=4, ge=1, description="Patch stride in pixels")
    layer: int = Field(default=9, ge=1, description="1-based transformer layer for external adapters")
    head: HeadKind = Field(default="key", description="Which attention projection (or token output) to read")
    dim: int = Field(default=SYNTHETIC_DIM, ge=1, description="Descriptor dimension D")
    model: str = Field(default="dino-s", description="Registered adapter name for external-vit")
    noise_eps: float = Field(default=0.05, ge=0, description="Perturbation magnitude for synthetic-noisy")
    seed: int = Field(default=0, description="Seed for synthetic-noisy perturbations")

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _check_geometry(self) -> "BackboneSpec":
        if self.stride > self.patch_size:
            raise ValueError("patch_size must be >= stride")
        if self.kind != "external-vit" and (self.dim < 10 or (self.dim - 2) % 8 != 0):
            raise ValueError("synthetic backbones need dim = 8 * octaves + 2 with at least one octave")
        return self


class PatchGridGeometry(BaseModel):
    """Feature-grid size and its mapping to receptive-field centers."""

    grid_h: int = Field(ge=1)
    grid_w: int = Field(ge=1)
    transform: CoordTransform

    model_config = {"frozen": True}


class DecoderConfig(BaseModel):
    """Widths of the trainable decoders."""

    out_dim: int = Field(default=256, ge=1, description="Output descriptor dimension")
    hidden_dim: Optional[int] = Field(default=None, ge=1, description="Width of the first block (defaults to out_dim)")

    @property
    def hidden(self) -> int:
        """Resolved hidden width."""
        return self.hidden_dim or self.out_dim


class GaussianTargetSpec(BaseModel):
    """Ground-truth similarity target centered on a landmark."""

    sigma: float = Field(gt=0, description="Standard deviation in grid units")
    center: Point = Field(description="(x, y) in grid units")


class MatchConfig(BaseModel):
    """Bidirectional matching parameters."""

    k: int = Field(default=3, ge=1, description="Number of forward candidates")
    tie_break: Literal["row-major-first"] = Field(default="row-major-first")
    clamp_k: bool = Field(default=False, description="Clamp k to the grid size instead of failing")


class InferenceConfig(BaseModel):
    """Detection-time choices, also the axes of the component ablation."""

    k: int = Field(default=3, ge=1, description="Number of forward candidates for BDM")
    matching: MatchingKind = Field(default="bdm")
    stages: StageKind = Field(default="global+local")

    def match_config(self) -> MatchConfig:
        """Matching parameters for pipeline use (k clamped with a warning)."""
        k = 1 if self.matching == "argmax" else self.k
        return MatchConfig(k=k, clamp_k=True)


class AugmentationRanges(BaseModel):
    """Ranges for random template augmentation."""

    shift_frac: float = Field(default=0.10, ge=0, description="Max shift as a fraction of width/height")
    scale_min: float = Field(default=0.9, gt=0)
    scale_max: float = Field(default=1.1, gt=0)
    rotate_deg: float = Field(default=10.0, ge=0, description="Max absolute rotation in degrees")

    @model_validator(mode="after")
    def _check_scale(self) -> "AugmentationRanges":
        if self.scale_min > self.scale_max:
            raise ValueError("scale_min must not exceed scale_max")
        return self

    @classmethod
    def none(cls) -> "AugmentationRanges":
        """Ranges that always produce the identity transform."""
        return cls(shift_frac=0.0, scale_min=1.0, scale_max=1.0, rotate_deg=0.0)


class TrainConfig(BaseModel):
    """Decoder training schedule."""

    lr: float = Field(default=2e-4, gt=0)
    batch: int = Field(default=4, ge=1)
    iters_global: int = Field(default=20000, ge=0)
    iters_local: int = Field(default=1000, ge=0)
    sigma_global: float = Field(default=5.0, gt=0)
    sigma_local: float = Field(default=2.0, gt=0)
    aug_count: int = Field(default=500, ge=1)
    aug_ranges: AugmentationRanges = Field(default_factory=AugmentationRanges)
    short_side: int = Field(default=224, ge=1, description="Short side of the coarse-stage image")
    crop_size: int = Field(default=224, ge=1, description="Side of the fine-stage crop")
    crop_jitter: float = Field(default=16.0, ge=0, description="Uniform jitter of training crop centers, px")
    loss: LossKind = Field(default="distance-aware")
    contrastive_temperature: float = Field(default=0.07, gt=0)
    decoder: DecoderConfig = Field(default_factory=DecoderConfig)
    seed: int = Field(default=0)
    progress: bool = Field(default=True, description="Show tqdm progress bars")
