"""
Options and helpers shared by the CLI commands.
"""
import functools
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, get_args

import click
from pydantic import ValidationError

from oneshot_landmarks.backbone import register_external_adapter, registered_adapters
from oneshot_landmarks.backbone.descriptor_io import PrecomputedDescriptorAdapter
from oneshot_landmarks.backbone.vit_adapter import ViTFeatureAdapter
from oneshot_landmarks.errors import DatasetError, LandmarkError
from oneshot_landmarks.evaldata.dataset import Dataset, load_dataset, read_annotations, read_image
from oneshot_landmarks.models.grids import ImageGrid, LandmarkSet
from oneshot_landmarks.models.specs import BackboneKind, BackboneSpec
from oneshot_landmarks.pipeline.detector import TemplateState
from oneshot_landmarks.utils.config import (
    PRESETS,
    Config,
    ConfigurationError,
    RunConfig,
    apply_torch_settings,
    cli_overrides,
    deep_merge,
    load_run_config,
)
from oneshot_landmarks.utils.logger import Logger

logger = Logger(__name__)

EXIT_RUNTIME = 1
EXIT_VALIDATION = 2

# Adapter name -> torch hub (repo, entry point)
HUB_MODELS: Dict[str, Tuple[str, str]] = {
    "dino-s": ("facebookresearch/dino:main", "dino_vits8"),
    "dino-b": ("facebookresearch/dino:main", "dino_vitb8"),
}


def run_options(func):
    """Attach the options every command resolves its RunConfig from."""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
                     help="TOML or JSON run configuration"),
        click.option("--preset", type=click.Choice(sorted(PRESETS)), default=None, help="Preset defaults"),
        click.option("--seed", type=int, default=None, help="Seed for training and synthetic noise"),
        click.option("--k", type=click.IntRange(min=1), default=None, help="Forward candidates for BDM"),
        click.option("--backbone", type=click.Choice(list(get_args(BackboneKind))), default=None,
                     help="Backbone kind"),
        click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None,
                     help="Output directory"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def handle_errors(func):
    """
    Map failures to exit codes.

    Configuration, dataset and validation problems (including missing paths) exit with 2,
    everything else with 1.
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (click.ClickException, click.exceptions.Exit):
            raise
        except (ConfigurationError, DatasetError, ValidationError, FileNotFoundError) as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_VALIDATION)
        except LandmarkError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_RUNTIME)
        except Exception as e:
            logger.error(f"Unexpected failure: {e!r}")
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_RUNTIME)

    return wrapper


def resolve_run(
    config_path: Optional[Path],
    preset: Optional[str],
    seed: Optional[int],
    k: Optional[int],
    backbone: Optional[str],
    out: Optional[Path],
    extra: Optional[Dict[str, Any]] = None,
    base: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """
    Merge preset, config file and flags into a RunConfig.

    ``base`` sits below the preset, so a bundle's stored settings apply unless overridden.
    """
    overrides = cli_overrides(seed=seed, k=k, backbone=backbone, out=str(out) if out else None)
    overrides = deep_merge(overrides, extra or {})
    return load_run_config(config_path, preset, overrides, base=base)


def bundle_defaults(state: TemplateState) -> Dict[str, Any]:
    """Run settings a loaded bundle contributes below preset, config file and flags."""
    return {"inference": state.inference.model_dump(mode="json")}


def setup_backbone(spec: BackboneSpec, descriptor_dir: Optional[str] = None) -> None:
    """
    Prepare feature extraction for a backbone spec.

    External backbones are served from precomputed descriptor files when a directory is
    configured, otherwise from a torch hub model registered under ``spec.model``.

    Raises:
        ConfigurationError: For external models with no known source
    """
    apply_torch_settings()
    if spec.kind != "external-vit":
        return
    if descriptor_dir:
        register_external_adapter(PrecomputedDescriptorAdapter(descriptor_dir), name=spec.model)
        return
    if spec.model in registered_adapters():
        return
    if spec.model not in HUB_MODELS:
        raise ConfigurationError(
            f"No source for backbone model '{spec.model}': set descriptor_dir or use one of {sorted(HUB_MODELS)}"
        )
    repo, name = HUB_MODELS[spec.model]
    adapter = ViTFeatureAdapter.from_torch_hub(repo, name, stride=spec.stride, device=Config().device)
    register_external_adapter(adapter, name=spec.model)


def load_template(run: RunConfig) -> Tuple[ImageGrid, LandmarkSet]:
    """
    Template image and landmarks, from explicit files or the dataset manifest.

    Raises:
        ConfigurationError: When neither source is configured
        DatasetError: Naming a missing or invalid file
    """
    if run.template_image:
        if not run.template_landmarks:
            raise ConfigurationError("template_landmarks is required together with template_image")
        return read_image(run.template_image), read_annotations(run.template_landmarks)
    if run.dataset:
        sample = load_run_dataset(run).template()
        return sample.image(), sample.landmarks
    raise ConfigurationError("No template: pass --dataset, or --template together with --landmarks")


def load_run_dataset(run: RunConfig) -> Dataset:
    """The dataset named by the run configuration."""
    if not run.dataset:
        raise ConfigurationError("No dataset manifest configured: pass --dataset")
    return load_dataset(run.dataset)


def output_dir(run: RunConfig) -> Path:
    """Create and return the run's output directory."""
    path = Path(run.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path
