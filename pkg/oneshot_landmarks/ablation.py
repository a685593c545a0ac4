"""
Component, loss and backbone ablation sweeps.

Each grid evaluates a family of configurations on one dataset and produces one row per
configuration. Decoders are trained once per distinct training setting; zero-shot grids
(head, layer, model) match raw backbone features with BDM.
"""
import csv
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, Field
from tabulate import tabulate

from oneshot_landmarks.backbone import registered_adapters
from oneshot_landmarks.evaldata.dataset import Dataset
from oneshot_landmarks.evaldata.report import EvalReport, evaluate
from oneshot_landmarks.models.specs import BackboneSpec, InferenceConfig, TrainConfig
from oneshot_landmarks.pipeline.detector import LandmarkDetector, TemplateState, build_template_state
from oneshot_landmarks.pipeline.trainer import train_decoders
from oneshot_landmarks.utils.config import RunConfig
from oneshot_landmarks.utils.logger import Logger

logger = Logger(__name__)

GridKind = Literal["stages", "loss", "head", "layer", "model"]
GRIDS: Tuple[str, ...] = ("stages", "loss", "head", "layer", "model")

STAGE_SETTINGS: Tuple[Tuple[str, str], ...] = (
    ("argmax", "raw"),
    ("bdm", "raw"),
    ("bdm", "global"),
    ("bdm", "global+local"),
)
LOSS_SETTINGS: Tuple[str, ...] = ("distance-aware", "onehot-mse", "contrastive")
HEAD_SETTINGS: Tuple[str, ...] = ("key", "query", "value", "token")
DEFAULT_LAYERS: Tuple[int, ...] = (3, 6, 9, 12)

ABLATION_CSV = "ablation.csv"
ABLATION_MD = "ablation.md"


class AblationRow(BaseModel):
    """Result of one configuration in a sweep."""

    grid: str
    setting: str = Field(description="Human readable configuration label")
    matching: str
    stages: str
    mre_mm: float
    sdr: Dict[str, float] = Field(description="Threshold (as text) to success percentage")

    @classmethod
    def from_report(cls, grid: str, setting: str, inference: InferenceConfig, report: EvalReport) -> "AblationRow":
        return cls(
            grid=grid,
            setting=setting,
            matching=inference.matching,
            stages=inference.stages,
            mre_mm=report.mre_mm,
            sdr=dict(report.sdr),
        )


def _template(dataset: Dataset):
    sample = dataset.template()
    return sample.image(), sample.landmarks


def _score(
    dataset: Dataset,
    state: TemplateState,
    inference: InferenceConfig,
    run: RunConfig,
    progress: bool,
) -> EvalReport:
    detector = LandmarkDetector(state, inference)
    return evaluate(dataset, detector, run.thresholds_mm, workers=run.workers, progress=progress)


def _trained_state(dataset: Dataset, backbone: BackboneSpec, train: TrainConfig, digest: str) -> TemplateState:
    image, landmarks = _template(dataset)
    result = train_decoders(image, landmarks, backbone, train)
    return build_template_state(
        image, landmarks, backbone, train,
        decoders=(result.global_decoder, result.local_decoder),
        config_digest=digest,
    )


def _zero_shot_state(dataset: Dataset, backbone: BackboneSpec, train: TrainConfig) -> TemplateState:
    image, landmarks = _template(dataset)
    return build_template_state(image, landmarks, backbone, train)


def ablate_stages(dataset: Dataset, run: RunConfig, progress: bool = True) -> List[AblationRow]:
    """
    Matching and stage components: argmax/raw, BDM/raw, BDM/global, BDM/global+local.

    The decoders are trained once and shared by the decoded settings.
    """
    state = _trained_state(dataset, run.backbone, run.train, run.digest())
    rows = []
    for matching, stages in STAGE_SETTINGS:
        inference = run.inference.model_copy(update={"matching": matching, "stages": stages})
        report = _score(dataset, state, inference, run, progress)
        rows.append(AblationRow.from_report("stages", f"{matching}/{stages}", inference, report))
    return rows


def ablate_loss(dataset: Dataset, run: RunConfig, progress: bool = True) -> List[AblationRow]:
    """
    Training losses compared on the global stage; the local decoder is not trained.
    Each state carries the digest of its own variant of the run configuration.
    """
    inference = run.inference.model_copy(update={"matching": "bdm", "stages": "global"})
    rows = []
    for loss in LOSS_SETTINGS:
        train = run.train.model_copy(update={"loss": loss, "iters_local": 0})
        variant = run.model_copy(update={"train": train})
        state = _trained_state(dataset, run.backbone, train, variant.digest())
        report = _score(dataset, state, inference, run, progress)
        rows.append(AblationRow.from_report("loss", loss, inference, report))
    return rows


def _zero_shot_rows(
    grid: str,
    dataset: Dataset,
    run: RunConfig,
    variants: Sequence[Tuple[str, BackboneSpec]],
    progress: bool,
) -> List[AblationRow]:
    inference = run.inference.model_copy(update={"matching": "bdm", "stages": "raw"})
    rows = []
    for label, backbone in variants:
        state = _zero_shot_state(dataset, backbone, run.train)
        report = _score(dataset, state, inference, run, progress)
        rows.append(AblationRow.from_report(grid, label, inference, report))
    return rows


def ablate_head(dataset: Dataset, run: RunConfig, progress: bool = True) -> List[AblationRow]:
    """Key, query, value and token descriptors of the configured layer."""
    variants = [(head, run.backbone.model_copy(update={"head": head})) for head in HEAD_SETTINGS]
    return _zero_shot_rows("head", dataset, run, variants, progress)


def ablate_layer(
    dataset: Dataset,
    run: RunConfig,
    layers: Sequence[int] = DEFAULT_LAYERS,
    progress: bool = True,
) -> List[AblationRow]:
    """Descriptors of each listed 1-based layer."""
    variants = [(f"layer {layer}", run.backbone.model_copy(update={"layer": layer})) for layer in layers]
    return _zero_shot_rows("layer", dataset, run, variants, progress)


def ablate_model(
    dataset: Dataset,
    run: RunConfig,
    models: Optional[Sequence[str]] = None,
    progress: bool = True,
) -> List[AblationRow]:
    """Every registered external adapter (or the listed ones) at the configured layer and head."""
    models = list(models) if models is not None else registered_adapters()
    if not models:
        logger.warning("Model ablation requested but no backbone adapters are registered")
    variants = [
        (name, run.backbone.model_copy(update={"kind": "external-vit", "model": name})) for name in models
    ]
    return _zero_shot_rows("model", dataset, run, variants, progress)


def run_ablation(
    grid: GridKind,
    dataset: Dataset,
    run: RunConfig,
    out_dir: Optional[Union[str, Path]] = None,
    layers: Sequence[int] = DEFAULT_LAYERS,
    models: Optional[Sequence[str]] = None,
    progress: bool = True,
) -> List[AblationRow]:
    """
    Run one ablation grid and optionally write its tables.

    Args:
        grid: ``stages``, ``loss``, ``head``, ``layer`` or ``model``
        dataset: Evaluation dataset; its template trains the decoders
        run: Resolved run configuration
        out_dir: Where ``ablation.csv`` and ``ablation.md`` go (skipped when None)
        layers: Layers for the layer grid
        models: Adapter names for the model grid (defaults to all registered)
        progress: Show progress bars

    Returns:
        One row per configuration, in grid order
    """
    if grid == "stages":
        rows = ablate_stages(dataset, run, progress)
    elif grid == "loss":
        rows = ablate_loss(dataset, run, progress)
    elif grid == "head":
        rows = ablate_head(dataset, run, progress)
    elif grid == "layer":
        rows = ablate_layer(dataset, run, layers, progress)
    elif grid == "model":
        rows = ablate_model(dataset, run, models, progress)
    else:
        raise ValueError(f"unknown ablation grid '{grid}', expected one of {GRIDS}")

    for row in rows:
        logger.info(f"[{grid}] {row.setting}: MRE {row.mre_mm:.3f} mm")
    if out_dir is not None:
        write_ablation(rows, run.thresholds_mm, out_dir)
    return rows


def _table(rows: List[AblationRow], thresholds_mm: Sequence[float]) -> Tuple[List[str], List[list]]:
    keys = [repr(float(t)) for t in thresholds_mm]
    headers = ["grid", "setting", "matching", "stages", "mre_mm"] + [f"sdr_{t:g}mm" for t in thresholds_mm]
    body = [
        [r.grid, r.setting, r.matching, r.stages, r.mre_mm] + [r.sdr.get(k, float("nan")) for k in keys]
        for r in rows
    ]
    return headers, body


def write_ablation(
    rows: List[AblationRow],
    thresholds_mm: Sequence[float],
    out_dir: Union[str, Path],
) -> Tuple[Path, Path]:
    """
    Write the rows as CSV and as a markdown table.

    Returns:
        (csv path, markdown path)
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    headers, body = _table(rows, thresholds_mm)

    csv_path = out_dir / ABLATION_CSV
    with csv_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(headers)
        writer.writerows(body)

    md_path = out_dir / ABLATION_MD
    md_path.write_text(tabulate(body, headers=headers, tablefmt="github", floatfmt=".3f") + "\n")
    return csv_path, md_path
