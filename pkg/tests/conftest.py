"""
Shared fixtures: a small synthetic template with queries and tiny training settings.
"""
import numpy as np
import pytest

from oneshot_landmarks.models.grids import ImageGrid, LandmarkSet
from oneshot_landmarks.models.specs import BackboneSpec, DecoderConfig, TrainConfig
from oneshot_landmarks.synth import SynthParams, generate_samples


@pytest.fixture(scope="session")
def synth_params():
    """Parameters of the shared synthetic samples."""
    return SynthParams(queries=3, landmark_count=3, height=64, width=64, blobs=24, seed=7)


@pytest.fixture(scope="session")
def synthetic_samples(synth_params):
    """Template (first) and three warped queries, 64x64, three landmarks each."""
    return generate_samples(synth_params)


@pytest.fixture
def template(synthetic_samples):
    """The synthetic template image and its landmarks."""
    return synthetic_samples[0]


@pytest.fixture
def backbone_spec():
    """Deterministic positional backbone, patch 8 / stride 4, D = 34."""
    return BackboneSpec(kind="synthetic-positional")


@pytest.fixture
def tiny_train_config():
    """A few optimizer steps on 64px images with 32px crops."""
    return TrainConfig(
        iters_global=3,
        iters_local=3,
        aug_count=4,
        batch=2,
        short_side=64,
        crop_size=32,
        crop_jitter=2.0,
        sigma_global=2.0,
        sigma_local=2.0,
        decoder=DecoderConfig(out_dim=8),
        progress=False,
    )


@pytest.fixture(scope="session")
def gradient_image():
    """40x48 horizontal ramp with a bright square, spacing 0.1 mm."""
    pixels = np.tile(np.linspace(0.0, 0.5, 48), (40, 1))
    pixels[10:20, 12:24] = 1.0
    return ImageGrid(pixels=pixels, spacing_mm=0.1)


@pytest.fixture(scope="session")
def square_landmarks():
    """Corners of the bright square of ``gradient_image``."""
    return LandmarkSet(points=[(12.0, 10.0), (23.0, 10.0), (12.0, 19.0), (23.0, 19.0)])
