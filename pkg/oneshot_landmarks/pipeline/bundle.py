"""
Trained-state bundles.

A bundle is a directory holding ``bundle.json`` (specs, default inference settings, landmarks,
sizes, transforms and the config digest), one safetensors checkpoint per decoder, the template's cached
backbone features in ``template_features.safetensors`` and ``loss_history.csv``.
Decoded and fused template maps are not stored; they are recomputed from the cached
features on first use, which reproduces them bit-exactly.
"""
import csv
import json
from pathlib import Path
from typing import Optional, Tuple, Union

from safetensors import safe_open
from safetensors.torch import save_file

from oneshot_landmarks.backbone import DescriptorProvider
from oneshot_landmarks.decoders import load_decoder, save_decoder
from oneshot_landmarks.errors import BundleError, DecoderError
from oneshot_landmarks.models.geometry import CoordTransform
from oneshot_landmarks.models.grids import FeatureMap, LandmarkSet
from oneshot_landmarks.models.specs import BackboneSpec, InferenceConfig, TrainConfig
from oneshot_landmarks.pipeline.detector import TemplateState
from oneshot_landmarks.pipeline.trainer import LossHistory
from oneshot_landmarks.utils.logger import Logger

logger = Logger(__name__)

FORMAT_VERSION = 1
MANIFEST = "bundle.json"
GLOBAL_CHECKPOINT = "global_decoder.safetensors"
LOCAL_CHECKPOINT = "local_decoder.safetensors"
FEATURES = "template_features.safetensors"
LOSS_HISTORY = "loss_history.csv"


def _transform_json(t: CoordTransform) -> dict:
    return {"scale": t.scale, "offset": list(t.offset)}


def _transform_from(data: dict) -> CoordTransform:
    return CoordTransform(scale=data["scale"], offset=tuple(data["offset"]))


def write_loss_history(history: LossHistory, path: Union[str, Path]) -> Path:
    """Write ``stage,step,loss`` rows."""
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["stage", "step", "loss"])
        for stage, step, loss in history.rows():
            writer.writerow([stage, step, repr(loss)])
    return path


def read_loss_history(path: Union[str, Path]) -> LossHistory:
    """Read a loss history written by ``write_loss_history``."""
    history = LossHistory()
    with Path(path).open(newline="") as handle:
        for row in csv.DictReader(handle):
            target = history.global_losses if row["stage"] == "global" else history.local_losses
            target.append(float(row["loss"]))
    return history


def save_bundle(
    state: TemplateState,
    directory: Union[str, Path],
    loss_history: Optional[LossHistory] = None,
) -> Path:
    """
    Persist a template state with trained decoders.

    Args:
        state: State to save
        directory: Bundle directory (created if needed)
        loss_history: Training losses to keep alongside

    Returns:
        The bundle directory
    """
    if not state.has_decoders:
        raise BundleError("decoders-missing", "only states with trained decoders can be bundled")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    save_decoder(state.global_decoder, directory / GLOBAL_CHECKPOINT, state.config_digest)
    save_decoder(state.local_decoder, directory / LOCAL_CHECKPOINT, state.config_digest)

    tensors = {"raw_global": state.raw_global.data.contiguous()}
    for i, crop in enumerate(state.crop_features):
        tensors[f"crop_{i}"] = crop.data.contiguous()
    save_file(tensors, str(directory / FEATURES), metadata={"format_version": str(FORMAT_VERSION)})

    manifest = {
        "format_version": FORMAT_VERSION,
        "config_digest": state.config_digest,
        "backbone": state.backbone.model_dump(mode="json"),
        "train": state.train.model_dump(mode="json"),
        "inference": state.inference.model_dump(mode="json"),
        "landmarks": [list(p) for p in state.landmarks.points],
        "template_size": list(state.template_size),
        "small_size": list(state.small_size),
        "small_transform": _transform_json(state.small_transform),
        "raw_global_transform": _transform_json(state.raw_global.transform),
        "crop_feature_transforms": [_transform_json(c.transform) for c in state.crop_features],
        "crop_transforms": [_transform_json(t) for t in state.crop_transforms],
    }
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2))
    write_loss_history(loss_history or LossHistory(), directory / LOSS_HISTORY)
    logger.info(f"Saved bundle with {state.landmarks.count} landmarks to {directory}")
    return directory


def load_bundle(
    directory: Union[str, Path],
    adapter: Optional[DescriptorProvider] = None,
) -> Tuple[TemplateState, LossHistory]:
    """
    Load a bundle written by ``save_bundle``.

    Args:
        directory: Bundle directory
        adapter: Descriptor provider for query images on external backbones

    Returns:
        The template state and the stored loss history

    Raises:
        BundleError: ``bundle-missing`` or ``bundle-invalid``
    """
    directory = Path(directory)
    if not (directory / MANIFEST).exists():
        raise BundleError("bundle-missing", f"no {MANIFEST} in {directory}")
    try:
        manifest = json.loads((directory / MANIFEST).read_text())
        if manifest.get("format_version") != FORMAT_VERSION:
            raise BundleError("bundle-invalid", f"unsupported bundle version {manifest.get('format_version')}")
        with safe_open(str(directory / FEATURES), framework="pt") as handle:
            raw_global = FeatureMap(
                data=handle.get_tensor("raw_global"),
                transform=_transform_from(manifest["raw_global_transform"]),
            )
            crop_features = [
                FeatureMap(data=handle.get_tensor(f"crop_{i}"), transform=_transform_from(t))
                for i, t in enumerate(manifest["crop_feature_transforms"])
            ]
        state = TemplateState(
            backbone=BackboneSpec.model_validate(manifest["backbone"]),
            train=TrainConfig.model_validate(manifest["train"]),
            inference=InferenceConfig.model_validate(manifest.get("inference", {})),
            landmarks=LandmarkSet(points=manifest["landmarks"]),
            template_size=tuple(manifest["template_size"]),
            small_transform=_transform_from(manifest["small_transform"]),
            small_size=tuple(manifest["small_size"]),
            raw_global=raw_global,
            crop_features=crop_features,
            crop_transforms=[_transform_from(t) for t in manifest["crop_transforms"]],
            global_decoder=load_decoder(directory / GLOBAL_CHECKPOINT),
            local_decoder=load_decoder(directory / LOCAL_CHECKPOINT),
            config_digest=manifest["config_digest"],
            adapter=adapter,
        )
    except (KeyError, ValueError, OSError, DecoderError) as e:
        raise BundleError("bundle-invalid", f"{directory} is not a valid bundle: {e}")

    history_path = directory / LOSS_HISTORY
    history = read_loss_history(history_path) if history_path.exists() else LossHistory()
    return state, history
