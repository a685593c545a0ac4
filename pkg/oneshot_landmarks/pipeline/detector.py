"""
Coarse-to-fine landmark detection against a cached template.

Coarse: bidirectional matching on whole-image features of the downsampled query, mapped
back to original pixels. Fine: per landmark, a full-resolution crop around the coarse
point, local features fused with the matching global window, and a second bidirectional
match against the template's crop around the true landmark.
"""
from typing import Any, Dict, List, Optional, Tuple

import torch
from pydantic import BaseModel, Field, PrivateAttr

from oneshot_landmarks.backbone import DescriptorProvider, extract_features
from oneshot_landmarks.core import clamp_point, snap_to_grid, to_feature_coords, to_image_coords
from oneshot_landmarks.decoders import (
    Decoder,
    extract_global_region,
    fuse_features,
    global_decode,
    local_decode,
)
from oneshot_landmarks.errors import LandmarkError
from oneshot_landmarks.matching import bdm_match
from oneshot_landmarks.models.geometry import CoordTransform, GridIndex, Point
from oneshot_landmarks.models.grids import FeatureMap, ImageGrid, LandmarkSet, SimilarityMap
from oneshot_landmarks.models.results import DetectionResult, MatchResult
from oneshot_landmarks.models.specs import BackboneSpec, InferenceConfig, TrainConfig
from oneshot_landmarks.pipeline.imaging import crop_local_region, downsample_short_side
from oneshot_landmarks.simloss import cosine_similarity_map
from oneshot_landmarks.utils.logger import Logger

logger = Logger(__name__)


class TemplateState(BaseModel):
    """
    Everything detection needs from the template, immutable after construction.

    Decoders may be absent, which restricts detection to the ``raw`` stage.
    """

    backbone: BackboneSpec
    train: TrainConfig
    landmarks: LandmarkSet = Field(description="Template landmarks in original pixels")
    template_size: Tuple[int, int] = Field(description="(height, width) of the original template")
    small_transform: CoordTransform = Field(description="Downsampled template -> original")
    small_size: Tuple[int, int] = Field(description="(height, width) of the downsampled template")
    raw_global: FeatureMap = Field(description="Backbone features of the downsampled template")
    crop_features: List[FeatureMap] = Field(default_factory=list, description="Backbone features per landmark crop")
    crop_transforms: List[CoordTransform] = Field(default_factory=list, description="Template crop -> original")
    global_decoder: Optional[Decoder] = None
    local_decoder: Optional[Decoder] = None
    config_digest: str = ""
    inference: InferenceConfig = Field(default_factory=InferenceConfig, description="Default detection settings")
    config_digest: str = ""
    adapter: Optional[Any] = Field(default=None, exclude=True, description="DescriptorProvider for external backbones")

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    _decoded_global: Optional[FeatureMap] = PrivateAttr(default=None)
    _fused: Dict[int, FeatureMap] = PrivateAttr(default_factory=dict)

    @property
    def has_decoders(self) -> bool:
        """Whether trained decoders are attached."""
        return self.global_decoder is not None and self.local_decoder is not None

    def small_landmarks(self) -> List[Point]:
        """Landmarks in downsampled-template pixels."""
        return [to_feature_coords(p, self.small_transform) for p in self.landmarks.points]

    def decoded_global(self) -> FeatureMap:
        """Decoded global features of the template (computed once)."""
        if self._decoded_global is None:
            with torch.no_grad():
                self._decoded_global = global_decode(
                    self.raw_global, self.global_decoder, self.small_size[0], self.small_size[1]
                )
        return self._decoded_global

    def fused_template(self, index: int) -> FeatureMap:
        """Fused local features of the template crop around landmark ``index`` (cached)."""
        if index not in self._fused:
            size = self.train.crop_size
            with torch.no_grad():
                local = local_decode(self.crop_features[index], self.local_decoder, size, size)
                region = extract_global_region(
                    self.decoded_global(), self.crop_transforms[index], size, size, self.small_transform
                )
                self._fused[index] = fuse_features(local, region)
        return self._fused[index]


def build_template_state(
    template: ImageGrid,
    landmarks: LandmarkSet,
    backbone: BackboneSpec,
    cfg: TrainConfig,
    decoders: Optional[Tuple[Decoder, Decoder]] = None,
    adapter: Optional[DescriptorProvider] = None,
    config_digest: str = "",
    inference: Optional[InferenceConfig] = None,
) -> TemplateState:
    """
    Cache template features for detection.

    Args:
        template: Template image at original resolution
        landmarks: Template landmarks
        backbone: Backbone the decoders were trained on
        cfg: Training config (``short_side``, ``crop_size``)
        decoders: (global, local) trained decoders; None for raw-feature matching
        adapter: Explicit descriptor provider for external backbones
        config_digest: Digest of the run configuration
        inference: Detection settings stored with the state (BDM on global+local if None)

    Returns:
        The template state
    """
    landmarks.check_bounds(template)
    small, small_transform = downsample_short_side(template, cfg.short_side)
    raw_global = extract_features(small, backbone, adapter)

    crop_features, crop_transforms = [], []
    if decoders is not None:
        for p in landmarks.points:
            crop, transform = crop_local_region(template, p, cfg.crop_size)
            crop_features.append(extract_features(crop, backbone, adapter))
            crop_transforms.append(transform)

    global_decoder, local_decoder = decoders if decoders is not None else (None, None)
    return TemplateState(
        backbone=backbone,
        train=cfg,
        landmarks=landmarks,
        template_size=(template.height, template.width),
        small_transform=small_transform,
        small_size=(small.height, small.width),
        raw_global=raw_global,
        crop_features=crop_features,
        crop_transforms=crop_transforms,
        global_decoder=global_decoder,
        local_decoder=local_decoder,
        config_digest=config_digest,
        inference=inference or InferenceConfig(),
        adapter=adapter,
    )


def _coarse_maps(
    query: ImageGrid,
    state: TemplateState,
    cfg: InferenceConfig,
) -> Tuple[FeatureMap, FeatureMap, CoordTransform, ImageGrid]:
    """Template and query whole-image features at the configured stage."""
    small, small_transform = downsample_short_side(query, state.train.short_side)
    raw = extract_features(small, state.backbone, state.adapter)
    if cfg.stages == "raw":
        return state.raw_global, raw, small_transform, small
    if state.global_decoder is None:
        raise LandmarkError("decoders-missing", f"stage '{cfg.stages}' needs trained decoders")
    with torch.no_grad():
        decoded = global_decode(raw, state.global_decoder, small.height, small.width)
    return state.decoded_global(), decoded, small_transform, small


def _template_cells(state: TemplateState, f_t: FeatureMap) -> List[GridIndex]:
    cells = []
    for p in state.small_landmarks():
        g = to_feature_coords(p, f_t.transform)
        cells.append(snap_to_grid(g, f_t.grid_h, f_t.grid_w))
    return cells


def coarse_detect(
    query: ImageGrid,
    state: TemplateState,
    cfg: InferenceConfig,
) -> Tuple[List[Point], List[MatchResult]]:
    """
    Whole-image detection on the downsampled query.

    Args:
        query: Query image at original resolution
        state: Template state
        cfg: Inference config (``raw`` stage matches backbone features directly)

    Returns:
        Coarse points in original query pixels and one MatchResult per landmark
    """
    points, diagnostics, _ = _coarse(query, state, cfg)
    return points, diagnostics


def _coarse(
    query: ImageGrid,
    state: TemplateState,
    cfg: InferenceConfig,
) -> Tuple[List[Point], List[MatchResult], Tuple[FeatureMap, CoordTransform]]:
    f_t, f_q, small_transform, _ = _coarse_maps(query, state, cfg)
    match_cfg = cfg.match_config()
    to_original = f_q.transform.compose(small_transform)

    points, diagnostics = [], []
    for cell in _template_cells(state, f_t):
        result = bdm_match(f_t, f_q, cell, match_cfg)
        p = to_image_coords(result.query_point.as_point(), to_original)
        points.append(clamp_point(p, query.height, query.width))
        diagnostics.append(result)
    return points, diagnostics, (f_q, small_transform)


def fine_detect(
    query: ImageGrid,
    coarse_points: List[Point],
    state: TemplateState,
    cfg: InferenceConfig,
    coarse_diagnostics: Optional[List[MatchResult]] = None,
    query_global: Optional[Tuple[FeatureMap, CoordTransform]] = None,
) -> DetectionResult:
    """
    Refine coarse points with fused local features.

    Args:
        query: Query image at original resolution
        coarse_points: Coarse predictions in original query pixels
        state: Template state with trained decoders
        cfg: Inference config
        coarse_diagnostics: Coarse-stage match results to carry into the result
        query_global: Decoded whole-image query features and their downsampled -> original
            transform, when the caller already has them

    Returns:
        Final predictions, clamped to the query bounds
    """
    if not state.has_decoders:
        raise LandmarkError("decoders-missing", "fine detection needs trained decoders")
    size = state.train.crop_size
    match_cfg = cfg.match_config()
    if query_global is None:
        small, small_transform = downsample_short_side(query, state.train.short_side)
        with torch.no_grad():
            decoded = global_decode(
                extract_features(small, state.backbone, state.adapter), state.global_decoder, small.height, small.width
            )
    else:
        decoded, small_transform = query_global

    points, diagnostics = [], []
    for index, coarse in enumerate(coarse_points):
        f_t = state.fused_template(index)
        p_t = snap_to_grid(
            to_feature_coords(state.landmarks.points[index], state.crop_transforms[index]), f_t.grid_h, f_t.grid_w
        )
        crop, crop_transform = crop_local_region(query, coarse, size)
        with torch.no_grad():
            local = local_decode(extract_features(crop, state.backbone, state.adapter), state.local_decoder, size, size)
            region = extract_global_region(decoded, crop_transform, size, size, small_transform)
            f_q = fuse_features(local, region)
        result = bdm_match(f_t, f_q, p_t, match_cfg)
        p = to_image_coords(result.query_point.as_point(), f_q.transform.compose(crop_transform))
        points.append(clamp_point(p, query.height, query.width))
        diagnostics.append(result)

    return DetectionResult(
        points=points,
        coarse_points=list(coarse_points),
        diagnostics={"coarse": list(coarse_diagnostics or []), "fine": diagnostics},
    )


def detect(query: ImageGrid, state: TemplateState, cfg: InferenceConfig) -> DetectionResult:
    """
    Detect every template landmark on a query.

    The ``raw`` and ``global`` stages stop after coarse detection.
    """
    coarse, coarse_diagnostics, query_global = _coarse(query, state, cfg)
    if cfg.stages != "global+local":
        return DetectionResult(points=coarse, coarse_points=coarse, diagnostics={"coarse": coarse_diagnostics})
    return fine_detect(query, coarse, state, cfg, coarse_diagnostics, query_global)


class LandmarkDetector:
    """
    Convenience wrapper binding a template state to inference settings.
    """

    def __init__(self, state: TemplateState, inference: Optional[InferenceConfig] = None):
        """
        Args:
            state: Template state
            inference: Stage and matching choices (defaults to the state's own)
        """
        self.state = state
        self.inference = inference or state.inference

    def detect(self, image: ImageGrid) -> DetectionResult:
        """Full detection on one query."""
        return detect(image, self.state, self.inference)

    def coarse(self, image: ImageGrid) -> List[Point]:
        """Coarse points only."""
        return coarse_detect(image, self.state, self.inference)[0]

    def similarity_maps(self, image: ImageGrid) -> List[SimilarityMap]:
        """Forward similarity of each template landmark over the query's whole-image features."""
        f_t, f_q, _, _ = _coarse_maps(image, self.state, self.inference)
        return [
            cosine_similarity_map(f_q, f_t.vector_at(cell), index=i)
            for i, cell in enumerate(_template_cells(self.state, f_t))
        ]
