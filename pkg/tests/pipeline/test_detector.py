"""
Tests for coarse-to-fine detection.
"""
import math

import pytest

from oneshot_landmarks.core import euclidean_dist, seeded_rng, snap_to_grid, to_feature_coords, to_image_coords
from oneshot_landmarks.errors import LandmarkError
from oneshot_landmarks.models.grids import ImageGrid, LandmarkSet
from oneshot_landmarks.models.specs import BackboneSpec, InferenceConfig, TrainConfig
from oneshot_landmarks.pipeline import LandmarkDetector, build_template_state, coarse_detect, fine_detect
from oneshot_landmarks.synth import warp_sample


@pytest.fixture
def raw_state(template, backbone_spec):
    """Template state without decoders, coarse stage at full resolution."""
    image, landmarks = template
    return build_template_state(image, landmarks, backbone_spec, TrainConfig(short_side=64))


class TestRawDetection:
    """Matching raw backbone features."""

    @pytest.mark.parametrize("matching", ["bdm", "argmax"])
    def test_template_finds_its_own_cells(self, raw_state, template, matching):
        image, landmarks = template
        detector = LandmarkDetector(raw_state, InferenceConfig(matching=matching, stages="raw"))
        result = detector.detect(image)
        for point, truth, match in zip(result.points, landmarks.points, result.diagnostics["coarse"]):
            assert match.query_point == match.template_point
            assert match.inverse_error == 0.0
            assert point == to_image_coords(match.query_point.as_point(), raw_state.raw_global.transform)
            # the cell center nearest the landmark on a stride-4 grid
            assert euclidean_dist(point, truth) <= 2 * math.sqrt(2) + 1e-9
        assert result.points == result.coarse_points

    def test_decoded_stage_needs_decoders(self, raw_state, template):
        with pytest.raises(LandmarkError) as exc_info:
            LandmarkDetector(raw_state, InferenceConfig(stages="global")).detect(template[0])
        assert exc_info.value.code == "decoders-missing"

    def test_fine_stage_needs_decoders(self, raw_state, template):
        with pytest.raises(LandmarkError) as exc_info:
            fine_detect(template[0], list(template[1].points), raw_state, InferenceConfig())
        assert exc_info.value.code == "decoders-missing"

    def test_similarity_maps(self, raw_state, template):
        maps = LandmarkDetector(raw_state, InferenceConfig(stages="raw")).similarity_maps(template[0])
        assert [m.anchor for m in maps] == [0, 1, 2]
        assert all(m.shape == (15, 15) for m in maps)
        assert all(float(m.values.max()) <= 1.0 + 1e-6 for m in maps)


class TestTranslatedQuery:
    """Coarse detection on a shifted copy of the template."""

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_coarse_points_follow_the_shift(self, raw_state, template, backbone_spec, synth_params, seed):
        image, landmarks = template
        grid = raw_state.raw_global
        to_original = grid.transform.compose(raw_state.small_transform)
        # landmarks on cell centers, so only the query side is snapped
        centered = [
            to_image_coords(snap_to_grid(to_feature_coords(p, to_original), grid.grid_h, grid.grid_w).as_point(),
                            to_original)
            for p in landmarks.points
        ]
        state = build_template_state(image, LandmarkSet(points=centered), backbone_spec, raw_state.train)
        shift_only = synth_params.model_copy(
            update={"rotate_deg": 0.0, "scale_jitter": 0.0, "shift_frac": 0.05, "elastic_px": 0.0}
        )
        pixels, moved = warp_sample(image.pixels, centered, shift_only, seeded_rng(seed))
        query = ImageGrid(pixels=pixels, spacing_mm=image.spacing_mm)

        coarse, _ = coarse_detect(query, state, InferenceConfig(stages="raw"))
        for point, truth in zip(coarse, moved):
            assert euclidean_dist(point, truth) <= to_original.scale


class TestCoarseToFine:
    """Full pipeline with trained decoders."""

    def test_result_carries_both_stages(self, square_state, gradient_image, square_landmarks):
        result = LandmarkDetector(square_state).detect(gradient_image)
        assert len(result.points) == square_landmarks.count
        assert len(result.coarse_points) == square_landmarks.count
        assert set(result.diagnostics) == {"coarse", "fine"}

    @pytest.mark.benchmark
    def test_template_as_query_within_one_pixel(self, scaled_template, scaled_train_config, scaled_training):
        image, landmarks = scaled_template
        state = build_template_state(
            image, landmarks, BackboneSpec(), scaled_train_config,
            decoders=(scaled_training.global_decoder, scaled_training.local_decoder),
        )
        result = LandmarkDetector(state).detect(image)
        errors = [euclidean_dist(p, t) for p, t in zip(result.points, landmarks.points)]
        assert sum(errors) / len(errors) <= 1.0

    def test_repeated_detection_is_identical(self, square_state, gradient_image):
        detector = LandmarkDetector(square_state)
        assert detector.detect(gradient_image) == detector.detect(gradient_image)

    def test_global_stage_stops_after_coarse(self, square_state, gradient_image):
        inference = InferenceConfig(stages="global")
        result = LandmarkDetector(square_state, inference).detect(gradient_image)
        coarse, _ = coarse_detect(gradient_image, square_state, inference)
        assert result.points == coarse
        assert "fine" not in result.diagnostics

    def test_predictions_stay_in_bounds(self, square_state, synthetic_samples):
        query = synthetic_samples[1][0]
        result = LandmarkDetector(square_state).detect(query)
        for p in result.points + result.coarse_points:
            assert 0.0 <= p.x <= query.width - 1
            assert 0.0 <= p.y <= query.height - 1
