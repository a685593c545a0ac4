"""
Dataset manifests, image reading and annotation files.

Annotation files are CSV with rows ``index,x,y`` (zero-based index, pixel coordinates,
origin at the top-left pixel center); a header row is optional. Manifest paths are
resolved relative to the manifest file.
"""
import csv
import json
import math
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image
from pydantic import BaseModel, Field, ValidationError, model_validator

from oneshot_landmarks.core import PointLike, euclidean_dist
from oneshot_landmarks.errors import DatasetError, GeometryError
from oneshot_landmarks.models.grids import ImageGrid, LandmarkSet
from oneshot_landmarks.utils.logger import Logger

logger = Logger(__name__)

IMAGE_SUFFIXES = (".png", ".bmp", ".jpg", ".jpeg", ".tif", ".tiff")


class SpacingCalibration(BaseModel):
    """Known isotropic pixel spacing."""

    mode: Literal["spacing"] = "spacing"
    spacing_mm: float = Field(gt=0, description="Millimeters per pixel")


class WristCalibration(BaseModel):
    """Spacing derived per image from two landmarks a known distance apart."""

    mode: Literal["wrist"] = "wrist"
    wrist_pair: Tuple[int, int] = Field(description="Landmark indices of the two endpoints")
    length_mm: float = Field(default=50.0, gt=0, description="Physical distance between the endpoints")


Calibration = Annotated[Union[SpacingCalibration, WristCalibration], Field(discriminator="mode")]


class DatasetManifest(BaseModel):
    """
    Description of an evaluation dataset.
    """

    name: str
    image_dir: str = Field(description="Image folder, relative to the manifest")
    annotation_dir: str = Field(description="Annotation CSV folder, relative to the manifest")
    landmark_count: int = Field(ge=1)
    calibration: Calibration
    template_id: str = Field(description="Id of the annotated template image")
    test_ids: List[str] = Field(default_factory=list, description="Ids of the query images")

    @model_validator(mode="after")
    def _check_calibration(self) -> "DatasetManifest":
        if isinstance(self.calibration, WristCalibration):
            for index in self.calibration.wrist_pair:
                if not 0 <= index < self.landmark_count:
                    raise ValueError(f"wrist landmark {index} outside 0..{self.landmark_count - 1}")
        return self


def read_image(path: Union[str, Path], spacing_mm: Optional[float] = None) -> ImageGrid:
    """
    Read a grayscale image scaled to [0, 1].

    8-bit and 16-bit grayscale are divided by their maximum code; color images are
    converted to luminance first.

    Raises:
        DatasetError: ``file-missing`` or ``image-unreadable``
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError("file-missing", f"image not found: {path}", path=path)
    try:
        with Image.open(path) as img:
            if img.mode in ("I;16", "I;16B", "I;16L", "I"):
                pixels = np.asarray(img, dtype=np.float64) / 65535.0
            elif img.mode == "F":
                pixels = np.asarray(img, dtype=np.float64)
            else:
                pixels = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    except OSError as e:
        raise DatasetError("image-unreadable", f"could not read {path}: {e}", path=path)
    return ImageGrid(pixels=np.clip(pixels, 0.0, 1.0), spacing_mm=spacing_mm)


def write_image(image: ImageGrid, path: Union[str, Path]) -> Path:
    """Write an image as 8-bit grayscale PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    codes = np.round(np.asarray(image.pixels, dtype=np.float64) * 255.0).astype(np.uint8)
    Image.fromarray(codes).save(path)
    return path


def read_annotations(path: Union[str, Path], landmark_count: Optional[int] = None) -> LandmarkSet:
    """
    Read an ``index,x,y`` annotation file.

    Args:
        path: CSV file
        landmark_count: Expected number of landmarks

    Returns:
        Landmarks ordered by index

    Raises:
        DatasetError: ``file-missing``, ``annotation-invalid`` or ``annotation-count-mismatch``
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError("file-missing", f"annotation file not found: {path}", path=path)
    rows: Dict[int, Tuple[float, float]] = {}
    with path.open(newline="") as handle:
        for line_no, row in enumerate(csv.reader(handle), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if line_no == 1 and not row[0].strip().lstrip("-").isdigit():
                continue
            try:
                index, x, y = int(row[0]), float(row[1]), float(row[2])
            except (ValueError, IndexError):
                raise DatasetError("annotation-invalid", f"{path}:{line_no}: expected 'index,x,y', got {row}", path=path)
            if not (math.isfinite(x) and math.isfinite(y)):
                raise DatasetError("annotation-invalid", f"{path}:{line_no}: non-finite coordinate", path=path)
            if index in rows:
                raise DatasetError("annotation-invalid", f"{path}:{line_no}: duplicate index {index}", path=path)
            rows[index] = (x, y)

    if landmark_count is not None and len(rows) != landmark_count:
        raise DatasetError(
            "annotation-count-mismatch",
            f"{path} has {len(rows)} landmarks, expected {landmark_count}",
            path=path,
        )
    if sorted(rows) != list(range(len(rows))) or not rows:
        raise DatasetError("annotation-invalid", f"{path}: indices must be 0..N-1", path=path)
    return LandmarkSet(points=[rows[i] for i in range(len(rows))])


def write_annotations(points: Sequence[PointLike], path: Union[str, Path]) -> Path:
    """Write ``index,x,y`` rows with a header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["index", "x", "y"])
        for i, p in enumerate(points):
            writer.writerow([i, repr(float(p[0])), repr(float(p[1]))])
    return path


class Sample(BaseModel):
    """One annotated image of a dataset; the pixels load on demand."""

    id: str
    image_path: Path
    annotation_path: Path
    landmarks: LandmarkSet
    mm_per_px: float = Field(gt=0)

    def image(self) -> ImageGrid:
        """Read the image, tagged with its resolution."""
        return read_image(self.image_path, spacing_mm=self.mm_per_px)


class Dataset:
    """
    Validated, read-only view of a dataset.
    """

    def __init__(self, manifest: DatasetManifest, samples: Dict[str, Sample]):
        self.manifest = manifest
        self._samples = samples

    @property
    def name(self) -> str:
        return self.manifest.name

    def sample(self, sample_id: str) -> Sample:
        """Look up one sample by id."""
        if sample_id not in self._samples:
            raise DatasetError("unknown-sample", f"no sample '{sample_id}' in dataset {self.name}")
        return self._samples[sample_id]

    def template(self) -> Sample:
        """The annotated template."""
        return self.sample(self.manifest.template_id)

    def test_samples(self) -> List[Sample]:
        """Query samples in manifest order."""
        return [self._samples[i] for i in self.manifest.test_ids]


def _find_image(directory: Path, sample_id: str) -> Path:
    for suffix in IMAGE_SUFFIXES:
        candidate = directory / f"{sample_id}{suffix}"
        if candidate.exists():
            return candidate
    raise DatasetError("file-missing", f"no image for '{sample_id}' in {directory}", path=directory / sample_id)


def _spacing(manifest: DatasetManifest, landmarks: LandmarkSet, path: Path) -> float:
    calibration = manifest.calibration
    if isinstance(calibration, SpacingCalibration):
        return calibration.spacing_mm
    a, b = calibration.wrist_pair
    distance = euclidean_dist(landmarks.points[a], landmarks.points[b])
    if distance <= 0:
        raise DatasetError("calibration-degenerate", f"{path}: wrist landmarks {a} and {b} coincide", path=path)
    return calibration.length_mm / distance


def image_size(path: Union[str, Path]) -> Tuple[int, int]:
    """
    (width, height) from the image header, without decoding pixels.

    Raises:
        DatasetError: ``image-unreadable``
    """
    try:
        with Image.open(path) as img:
            return img.size
    except OSError as e:
        raise DatasetError("image-unreadable", f"could not read {path}: {e}", path=Path(path))


def load_manifest(path: Union[str, Path]) -> DatasetManifest:
    """
    Parse a JSON manifest.

    Raises:
        DatasetError: ``file-missing`` or ``manifest-invalid``
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError("file-missing", f"manifest not found: {path}", path=path)
    try:
        return DatasetManifest.model_validate(json.loads(path.read_text()))
    except (json.JSONDecodeError, ValidationError) as e:
        raise DatasetError("manifest-invalid", f"{path}: {e}", path=path)


def load_dataset(manifest: Union[str, Path, DatasetManifest], root: Optional[Union[str, Path]] = None) -> Dataset:
    """
    Validate a dataset and index its samples.

    Every referenced image must exist with a readable header, and every annotation must
    parse with the declared landmark count and lie inside its image. Pixels are read later.

    Args:
        manifest: Manifest file, or a parsed manifest together with ``root``
        root: Directory the manifest's relative paths start from

    Returns:
        The dataset handle

    Raises:
        DatasetError: Naming the first offending file
    """
    if isinstance(manifest, DatasetManifest):
        root = Path(root or ".")
    else:
        root = Path(root) if root is not None else Path(manifest).parent
        manifest = load_manifest(manifest)

    image_dir = root / manifest.image_dir
    annotation_dir = root / manifest.annotation_dir
    for directory in (image_dir, annotation_dir):
        if not directory.is_dir():
            raise DatasetError("file-missing", f"directory not found: {directory}", path=directory)

    samples: Dict[str, Sample] = {}
    for sample_id in [manifest.template_id, *manifest.test_ids]:
        if sample_id in samples:
            continue
        annotation_path = annotation_dir / f"{sample_id}.csv"
        landmarks = read_annotations(annotation_path, manifest.landmark_count)
        image_path = _find_image(image_dir, sample_id)
        try:
            landmarks.check_size(*image_size(image_path))
        except GeometryError as e:
            raise DatasetError("annotation-out-of-bounds", f"{annotation_path}: {e}", path=annotation_path)
        samples[sample_id] = Sample(
            id=sample_id,
            image_path=image_path,
            annotation_path=annotation_path,
            landmarks=landmarks,
            mm_per_px=_spacing(manifest, landmarks, annotation_path),
        )
    logger.info(f"Loaded dataset {manifest.name}: template {manifest.template_id}, {len(manifest.test_ids)} queries")
    return Dataset(manifest, samples)
