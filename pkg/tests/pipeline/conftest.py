"""
Trained decoders shared across pipeline tests: a few steps on the bright square, and the
scaled schedule on a synthetic template for the benchmark-marked checks.
"""
import pytest

from oneshot_landmarks.models.specs import BackboneSpec, DecoderConfig, TrainConfig
from oneshot_landmarks.pipeline import build_template_state, train_decoders
from oneshot_landmarks.synth import SynthParams, generate_samples


@pytest.fixture(scope="session")
def square_train_config():
    """Full-resolution coarse stage (short side 40) with 16px crops."""
    return TrainConfig(
        iters_global=3,
        iters_local=3,
        aug_count=4,
        batch=2,
        short_side=40,
        crop_size=16,
        crop_jitter=2.0,
        sigma_global=2.0,
        sigma_local=2.0,
        decoder=DecoderConfig(out_dim=8),
        progress=False,
    )


@pytest.fixture(scope="session")
def trained_square(gradient_image, square_landmarks, square_train_config):
    """Decoders trained for a few steps on the bright square."""
    return train_decoders(gradient_image, square_landmarks, BackboneSpec(), square_train_config)


@pytest.fixture(scope="session")
def square_state(gradient_image, square_landmarks, square_train_config, trained_square):
    """Template state with trained decoders attached."""
    return build_template_state(
        gradient_image,
        square_landmarks,
        BackboneSpec(),
        square_train_config,
        decoders=(trained_square.global_decoder, trained_square.local_decoder),
        config_digest="square",
    )


@pytest.fixture(scope="session")
def scaled_template():
    """224x224 synthetic template with five landmarks."""
    return generate_samples(SynthParams(queries=0, landmark_count=5, height=224, width=224, seed=0))[0]


@pytest.fixture(scope="session")
def scaled_train_config():
    """Default training settings on the 2000/200 schedule."""
    return TrainConfig(iters_global=2000, iters_local=200, progress=False)


@pytest.fixture(scope="session")
def scaled_training(scaled_template, scaled_train_config):
    """Decoders trained on the scaled schedule with the positional backbone."""
    image, landmarks = scaled_template
    return train_decoders(image, landmarks, BackboneSpec(), scaled_train_config)
