"""
Tests for the synthetic benchmark generator.
"""
import json
import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest
from scipy import ndimage

from oneshot_landmarks.errors import AugmentationError
from oneshot_landmarks.evaldata.dataset import load_dataset
from oneshot_landmarks.synth import SynthParams, generate_samples, generate_synthetic_dataset


def _value_at(pixels: np.ndarray, x: float, y: float) -> float:
    return float(ndimage.map_coordinates(pixels.astype(np.float64), [[y], [x]], order=1)[0])


class TestGenerateSamples:
    """In-memory samples."""

    def test_template_first_and_counts(self, synthetic_samples, synth_params):
        assert len(synthetic_samples) == 1 + synth_params.queries
        for image, landmarks in synthetic_samples:
            assert (image.height, image.width) == (64, 64)
            assert landmarks.count == 3
            assert landmarks.in_bounds(image.height, image.width)

    def test_deterministic_per_seed(self, synth_params, synthetic_samples):
        again = generate_samples(synth_params)
        for (img_a, lms_a), (img_b, lms_b) in zip(again, synthetic_samples):
            assert np.array_equal(img_a.pixels, img_b.pixels)
            assert lms_a == lms_b
        other = generate_samples(synth_params.model_copy(update={"seed": 8}))
        assert not np.array_equal(other[0][0].pixels, synthetic_samples[0][0].pixels)

    def test_no_deformation_reproduces_template(self):
        params = SynthParams(queries=1, landmark_count=2, height=48, width=48, blobs=10,
                             rotate_deg=0.0, scale_jitter=0.0, shift_frac=0.0, elastic_px=0.0)
        (template, lms_t), (query, lms_q) = generate_samples(params)
        assert np.allclose(query.pixels, template.pixels, atol=1e-6)
        assert lms_q == lms_t

    def test_translation_carries_landmarks(self):
        params = SynthParams(queries=3, landmark_count=3, height=64, width=64, blobs=20,
                             rotate_deg=0.0, scale_jitter=0.0, shift_frac=0.08, elastic_px=0.0, seed=3)
        samples = generate_samples(params)
        template, lms_t = samples[0]
        for query, lms_q in samples[1:]:
            shifts = {(round(q.x - p.x, 9), round(q.y - p.y, 9)) for p, q in zip(lms_t.points, lms_q.points)}
            assert len(shifts) == 1
            for p, q in zip(lms_t.points, lms_q.points):
                assert _value_at(query.pixels, q.x, q.y) == pytest.approx(_value_at(template.pixels, p.x, p.y), abs=0.05)

    def test_too_many_landmarks(self):
        with pytest.raises(AugmentationError) as exc_info:
            generate_samples(SynthParams(queries=0, landmark_count=12, blobs=4))
        assert exc_info.value.code == "synthetic-degenerate"


class TestSyntheticDataset:
    """Dataset files on disk."""

    def setup_method(self):
        self.test_dir = Path(tempfile.mkdtemp())

    def teardown_method(self):
        shutil.rmtree(self.test_dir)

    def test_dataset_loads(self, synth_params):
        manifest = generate_synthetic_dataset(self.test_dir, synth_params)
        dataset = load_dataset(manifest)
        assert dataset.template().id == "0000"
        assert [s.id for s in dataset.test_samples()] == ["0001", "0002", "0003"]
        assert dataset.template().mm_per_px == 1.0
        stored = json.loads((self.test_dir / "synth_params.json").read_text())
        assert stored["seed"] == synth_params.seed
