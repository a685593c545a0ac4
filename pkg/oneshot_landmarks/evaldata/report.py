"""
Dataset evaluation and report files.

``report.json`` holds the summary and every per-point error; ``per_point_errors.csv``
holds the same errors with full float precision, so a report can be replayed exactly.
"""
import csv
import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, Field
from tqdm import tqdm

from oneshot_landmarks.evaldata.dataset import Dataset, Sample
from oneshot_landmarks.evaldata.metrics import mean_error, radial_errors, sdr
from oneshot_landmarks.models.results import DetectionResult
from oneshot_landmarks.pipeline.detector import LandmarkDetector
from oneshot_landmarks.utils.logger import Logger

logger = Logger(__name__)

REPORT_JSON = "report.json"
PER_POINT_CSV = "per_point_errors.csv"
CSV_COLUMNS = ["image_id", "landmark", "error_mm", "pred_x", "pred_y", "gt_x", "gt_y"]


class PointError(BaseModel):
    """Error of one landmark on one image."""

    image_id: str
    landmark: int
    error_mm: float
    pred_x: float
    pred_y: float
    gt_x: float
    gt_y: float


class EvalReport(BaseModel):
    """
    Evaluation summary over all (image, landmark) pairs.
    """

    thresholds_mm: List[float]
    mre_mm: float = Field(description="Micro-averaged mean radial error")
    sdr: Dict[str, float] = Field(description="Threshold (as text) to success percentage")
    coarse_mre_mm: Optional[float] = Field(default=None, description="MRE of the coarse stage alone")
    per_point: List[PointError] = Field(default_factory=list)

    def sdr_values(self) -> List[float]:
        """SDR percentages in threshold order."""
        return [self.sdr[_threshold_key(t)] for t in self.thresholds_mm]


def _threshold_key(threshold: float) -> str:
    return repr(float(threshold))


def summarize(
    per_point: List[PointError],
    thresholds_mm: Sequence[float],
    coarse_mre_mm: Optional[float] = None,
) -> EvalReport:
    """Aggregate per-point errors into a report."""
    errors = [p.error_mm for p in per_point]
    rates = sdr(errors, thresholds_mm)
    return EvalReport(
        thresholds_mm=list(thresholds_mm),
        mre_mm=mean_error(errors),
        sdr={_threshold_key(t): r for t, r in zip(thresholds_mm, rates)},
        coarse_mre_mm=coarse_mre_mm,
        per_point=per_point,
    )


def _run_one(detector: LandmarkDetector, sample: Sample) -> Tuple[Sample, DetectionResult]:
    return sample, detector.detect(sample.image())


def evaluate(
    dataset: Dataset,
    detector: LandmarkDetector,
    thresholds_mm: Sequence[float],
    workers: int = 1,
    progress: bool = True,
) -> EvalReport:
    """
    Detect on every test image and aggregate MRE and SDR.

    Args:
        dataset: Loaded dataset
        detector: Detector built from the dataset's template
        thresholds_mm: SDR thresholds, ascending
        workers: Threads for per-image detection; results are reduced in manifest order
        progress: Show a progress bar

    Returns:
        The report, including per-point errors
    """
    samples = dataset.test_samples()
    if not samples:
        raise ValueError(f"dataset {dataset.name} has no test images")

    bar = tqdm(total=len(samples), desc="evaluate", disable=None if progress else True, leave=False)
    results: List[Tuple[Sample, DetectionResult]] = []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for item in pool.map(lambda s: _run_one(detector, s), samples):
                results.append(item)
                bar.update(1)
    else:
        for sample in samples:
            results.append(_run_one(detector, sample))
            bar.update(1)
    bar.close()

    per_point: List[PointError] = []
    coarse_errors: List[float] = []
    for sample, result in results:
        gts = sample.landmarks.points
        errors = radial_errors(result.points, gts, sample.mm_per_px)
        coarse_errors.extend(radial_errors(result.coarse_points, gts, sample.mm_per_px))
        for i, (error, pred, gt) in enumerate(zip(errors, result.points, gts)):
            per_point.append(
                PointError(
                    image_id=sample.id, landmark=i, error_mm=error,
                    pred_x=pred.x, pred_y=pred.y, gt_x=gt.x, gt_y=gt.y,
                )
            )

    report = summarize(per_point, thresholds_mm, coarse_mre_mm=mean_error(coarse_errors))
    logger.info(f"Evaluated {len(samples)} images of {dataset.name}: MRE {report.mre_mm:.3f} mm")
    return report


def write_report(report: EvalReport, out_dir: Union[str, Path]) -> Tuple[Path, Path]:
    """
    Write ``report.json`` and ``per_point_errors.csv``.

    Returns:
        Both paths
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / REPORT_JSON
    json_path.write_text(json.dumps(report.model_dump(mode="json"), indent=2))

    csv_path = out_dir / PER_POINT_CSV
    with csv_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for p in report.per_point:
            writer.writerow([p.image_id, p.landmark] + [repr(getattr(p, c)) for c in CSV_COLUMNS[2:]])
    return json_path, csv_path


def read_per_point_errors(csv_path: Union[str, Path]) -> List[PointError]:
    """Read a per-point error CSV."""
    with Path(csv_path).open(newline="") as handle:
        return [PointError.model_validate(row) for row in csv.DictReader(handle)]


def replay_report(csv_path: Union[str, Path], thresholds_mm: Sequence[float]) -> EvalReport:
    """
    Recompute MRE and SDR from a per-point error CSV.

    The result matches the original report exactly for the same thresholds.
    """
    return summarize(read_per_point_errors(csv_path), thresholds_mm)
