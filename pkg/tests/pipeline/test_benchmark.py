"""
Measured checks on the 50-query synthetic benchmark.

Deselected by default; run with ``pytest -m benchmark``.
"""
import shutil
import tempfile
from pathlib import Path

import pytest

from oneshot_landmarks.ablation import run_ablation
from oneshot_landmarks.evaldata.dataset import load_dataset
from oneshot_landmarks.evaldata.report import evaluate
from oneshot_landmarks.models.specs import InferenceConfig
from oneshot_landmarks.pipeline import LandmarkDetector, build_template_state, train_decoders
from oneshot_landmarks.synth import SynthParams, generate_synthetic_dataset
from oneshot_landmarks.utils.config import load_run_config

TOLERANCE = 1e-9

pytestmark = pytest.mark.benchmark


@pytest.fixture(scope="module")
def benchmark_dataset():
    """The default 50-query synthetic dataset, written to a temporary folder."""
    directory = Path(tempfile.mkdtemp())
    manifest = generate_synthetic_dataset(directory, SynthParams(queries=50, seed=0))
    yield load_dataset(manifest)
    shutil.rmtree(directory)


@pytest.fixture(scope="module")
def benchmark_run():
    """The synthetic preset with the noisy backbone."""
    return load_run_config(preset="synthetic", overrides={"train": {"progress": False}})


def test_fine_stage_improves_on_coarse(benchmark_dataset, benchmark_run):
    template = benchmark_dataset.template()
    image = template.image()
    result = train_decoders(image, template.landmarks, benchmark_run.backbone, benchmark_run.train)
    state = build_template_state(
        image, template.landmarks, benchmark_run.backbone, benchmark_run.train,
        decoders=(result.global_decoder, result.local_decoder),
    )
    report = evaluate(
        benchmark_dataset, LandmarkDetector(state, InferenceConfig(k=3)), benchmark_run.thresholds_mm, progress=False
    )
    assert report.mre_mm <= report.coarse_mre_mm + TOLERANCE
    # spacing is 1 mm per pixel
    assert report.mre_mm < 2.0


def test_stage_ablation_is_monotone(benchmark_dataset, benchmark_run):
    rows = run_ablation("stages", benchmark_dataset, benchmark_run, progress=False)
    errors = [row.mre_mm for row in rows]
    assert [row.setting for row in rows] == ["argmax/raw", "bdm/raw", "bdm/global", "bdm/global+local"]
    for worse, better in zip(errors, errors[1:]):
        assert better <= worse + TOLERANCE


def test_distance_aware_loss_wins(benchmark_dataset, benchmark_run):
    rows = {row.setting: row.mre_mm for row in run_ablation("loss", benchmark_dataset, benchmark_run, progress=False)}
    assert rows["distance-aware"] <= rows["onehot-mse"] + TOLERANCE
    assert rows["distance-aware"] <= rows["contrastive"] + TOLERANCE
