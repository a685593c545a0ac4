"""
Configuration utilities.

Environment settings come from ``LANDMARK_*`` variables (a ``.env`` file is honored).
Run parameters are pydantic models merged from a preset, an optional TOML/JSON file and
explicit overrides, in that order of increasing precedence.
"""
import copy
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import torch
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from oneshot_landmarks.evaldata.metrics import HAND_THRESHOLDS_MM, HEAD_THRESHOLDS_MM
from oneshot_landmarks.models.specs import BackboneSpec, InferenceConfig, TrainConfig

load_dotenv()


class ConfigurationError(Exception):
    """
    Exception raised for invalid or missing configuration values.
    """
    pass


class Config:
    """
    Environment-level settings.
    """

    def __init__(self):
        """
        Initialize the configuration manager.

        Raises:
            ConfigurationError: For unparsable numeric settings
        """
        self._config_cache = {}
        self._log_level = os.getenv("LANDMARK_LOG_LEVEL", "INFO").upper()
        self._log_file = os.getenv("LANDMARK_LOG_FILE") or None
        self._output_dir = os.getenv("LANDMARK_OUTPUT_DIR", os.path.join(os.getcwd(), "landmark_runs"))
        self._device = os.getenv("LANDMARK_DEVICE", "cpu")
        self._num_threads = self._get_positive_int("LANDMARK_NUM_THREADS")

    def _get_positive_int(self, var_name: str) -> Optional[int]:
        """
        Read an optional positive integer environment variable.
        """
        value = os.getenv(var_name)
        if value is None or value.strip() == "":
            return None
        try:
            number = int(value)
        except ValueError:
            raise ConfigurationError(f"{var_name} must be an integer, got '{value}'")
        if number < 1:
            raise ConfigurationError(f"{var_name} must be positive, got {number}")
        return number

    @property
    def log_level(self) -> str:
        """
        Get the log level name.

        Returns:
            Level name such as ``INFO``
        """
        return self._log_level

    @property
    def log_file(self) -> Optional[str]:
        """
        Get the optional log file path.
        """
        return self._log_file

    @property
    def output_dir(self) -> str:
        """
        Get the default directory for run outputs.

        Returns:
            Output directory
        """
        return self._output_dir

    @property
    def device(self) -> str:
        """
        Get the torch device name.
        """
        return self._device

    @property
    def num_threads(self) -> Optional[int]:
        """
        Get the torch intra-op thread count, if set.
        """
        return self._num_threads

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get a configuration value.

        Args:
            key: Configuration key
            default: Default value if the key is not found

        Returns:
            Configuration value
        """
        if hasattr(self, f"_{key}"):
            return getattr(self, f"_{key}")

        env_value = os.getenv(key.upper(), None)
        if env_value is not None:
            self._config_cache[key] = env_value
            return env_value

        return self._config_cache.get(key, default)


def _default_output_dir() -> str:
    return Config().output_dir


class RunConfig(BaseModel):
    """
    Fully resolved parameters of one command invocation.
    """

    preset: Optional[str] = Field(default=None, description="Preset the run started from")
    backbone: BackboneSpec = Field(default_factory=BackboneSpec, description="Frozen feature extractor")
    train: TrainConfig = Field(default_factory=TrainConfig, description="Decoder training schedule")
    inference: InferenceConfig = Field(default_factory=InferenceConfig, description="Matching and stage choices")
    dataset: Optional[str] = Field(default=None, description="Dataset manifest path")
    template_image: Optional[str] = Field(default=None, description="Template image for training without a manifest")
    template_landmarks: Optional[str] = Field(default=None, description="Template annotation CSV")
    descriptor_dir: Optional[str] = Field(default=None, description="Precomputed descriptors for external backbones")
    output_dir: str = Field(default_factory=_default_output_dir, description="Where outputs are written")
    seed: int = Field(default=0, description="Seed applied to training and synthetic noise")
    thresholds_mm: List[float] = Field(default_factory=lambda: list(HAND_THRESHOLDS_MM))
    workers: int = Field(default=1, ge=1, description="Threads for per-image evaluation")

    def digest(self) -> str:
        """
        SHA-256 of the canonical JSON form.

        Returns:
            Hex digest that changes iff any field changes
        """
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def write(self, directory: Union[str, Path]) -> Path:
        """
        Write ``run_config.json`` (config plus digest) into a directory.
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "run_config.json"
        payload = {"digest": self.digest(), "config": self.model_dump(mode="json")}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True))
        return path


def _head_preset() -> Dict[str, Any]:
    return {
        "preset": "head",
        "backbone": {"kind": "external-vit", "model": "dino-s", "layer": 9, "head": "key"},
        "train": {"sigma_global": 5.0, "sigma_local": 2.0, "iters_global": 20000, "iters_local": 1000},
        "inference": {"k": 3},
        "thresholds_mm": list(HEAD_THRESHOLDS_MM),
    }


def _hand_preset() -> Dict[str, Any]:
    return {
        "preset": "hand",
        "backbone": {"kind": "external-vit", "model": "dino-s", "layer": 9, "head": "key"},
        "train": {"sigma_global": 8.0, "sigma_local": 8.0, "iters_global": 20000, "iters_local": 3000},
        "inference": {"k": 5},
        "thresholds_mm": list(HAND_THRESHOLDS_MM),
    }


def _synthetic_preset() -> Dict[str, Any]:
    return {
        "preset": "synthetic",
        "backbone": {"kind": "synthetic-noisy", "patch_size": 8, "stride": 4},
        "train": {
            "short_side": 64,
            "crop_size": 48,
            "crop_jitter": 4.0,
            "sigma_global": 2.0,
            "sigma_local": 2.0,
            "iters_global": 200,
            "iters_local": 60,
            "aug_count": 60,
            "decoder": {"out_dim": 32},
        },
        "inference": {"k": 3},
        "thresholds_mm": list(HAND_THRESHOLDS_MM),
    }


PRESETS = {
    "head": _head_preset,
    "hand": _hand_preset,
    "synthetic": _synthetic_preset,
}


def preset_config(name: str) -> Dict[str, Any]:
    """
    Raw settings of a named preset.

    Raises:
        ConfigurationError: For unknown presets
    """
    if name not in PRESETS:
        raise ConfigurationError(f"Unknown preset '{name}', expected one of {sorted(PRESETS)}")
    return PRESETS[name]()


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """
    Merge nested dictionaries, values from ``override`` winning.
    """
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a TOML or JSON config file (chosen by suffix).

    Raises:
        ConfigurationError: Missing file, unknown suffix or parse failure
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}")
    try:
        if path.suffix.lower() == ".toml":
            with path.open("rb") as handle:
                return tomllib.load(handle)
        if path.suffix.lower() == ".json":
            return json.loads(path.read_text())
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Could not parse config file {path}: {e}")
    raise ConfigurationError(f"Unsupported config format '{path.suffix}', use .toml or .json")


def cli_overrides(
    seed: Optional[int] = None,
    k: Optional[int] = None,
    backbone: Optional[str] = None,
    out: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Translate explicit CLI flags into a nested override dictionary.

    The seed flag reaches every seeded component.
    """
    overrides: Dict[str, Any] = {}
    if seed is not None:
        overrides["seed"] = seed
        overrides["train"] = {"seed": seed}
        overrides["backbone"] = {"seed": seed}
    if k is not None:
        overrides["inference"] = {"k": k}
    if backbone is not None:
        overrides = deep_merge(overrides, {"backbone": {"kind": backbone}})
    if out is not None:
        overrides["output_dir"] = out
    return overrides


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    preset: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    base: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Resolve a run configuration.

    Precedence, lowest to highest: base < preset < config file < overrides.

    Args:
        path: Optional TOML/JSON file
        preset: Optional preset name (a ``preset`` key in the file is used otherwise)
        overrides: Nested values from CLI flags
        base: Values below every other source, such as the settings stored in a bundle

    Returns:
        The validated run configuration

    Raises:
        ConfigurationError: For unreadable files, unknown presets or invalid values
    """
    file_values = load_config_file(path) if path else {}
    preset = preset or file_values.get("preset")
    data = deep_merge(base or {}, preset_config(preset) if preset else {})
    data = deep_merge(data, file_values)
    data = deep_merge(data, overrides or {})
    if path and file_values.get("dataset") and "dataset" not in (overrides or {}):
        dataset = Path(file_values["dataset"])
        if not dataset.is_absolute():
            data["dataset"] = str(Path(path).parent / dataset)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}")


def apply_torch_settings(config: Optional[Config] = None) -> None:
    """Apply the thread count from the environment to torch."""
    config = config or Config()
    if config.num_threads:
        torch.set_num_threads(config.num_threads)
