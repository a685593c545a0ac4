"""
CLI command for detecting landmarks with a trained bundle.
"""
import sys
from pathlib import Path
from typing import List, Optional

import click

from oneshot_landmarks.cli.common import (
    EXIT_RUNTIME,
    bundle_defaults,
    handle_errors,
    output_dir,
    resolve_run,
    run_options,
    setup_backbone,
)
from oneshot_landmarks.errors import DatasetError
from oneshot_landmarks.evaldata.dataset import IMAGE_SUFFIXES, read_annotations, read_image, write_annotations
from oneshot_landmarks.pipeline.bundle import load_bundle
from oneshot_landmarks.pipeline.detector import LandmarkDetector
from oneshot_landmarks.utils.logger import Logger
from oneshot_landmarks.visualize import plot_landmarks_on_image, plot_similarity_maps

logger = Logger(__name__)


def list_images(path: Path) -> List[Path]:
    """A single image, or the images of a directory in name order."""
    if path.is_file():
        return [path]
    return sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


@click.command()
@click.argument('bundle', type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.argument('images', type=click.Path(exists=True, path_type=Path))
@run_options
@click.option('--viz/--no-viz', default=False, help='Write overlay and similarity heatmap PNGs')
@click.option('--annotations', type=click.Path(exists=True, file_okay=False, path_type=Path), default=None,
              help='Directory of <image stem>.csv ground truth drawn on overlays')
@handle_errors
def detect(bundle: Path, images: Path, config_path: Optional[Path], preset: Optional[str], seed: Optional[int],
           k: Optional[int], backbone: Optional[str], out: Optional[Path], viz: bool,
           annotations: Optional[Path]):
    """
    Detect landmarks on IMAGES (a file or a directory) with a trained BUNDLE.

    Writes one <image stem>.csv of index,x,y rows per image.
    Matching settings stored in the bundle apply unless a preset, config file or --k overrides them.
    """
    state, _ = load_bundle(bundle)
    run = resolve_run(config_path, preset, seed, k, backbone, out, base=bundle_defaults(state))
    setup_backbone(state.backbone, run.descriptor_dir)
    detector = LandmarkDetector(state, run.inference)

    out_dir = output_dir(run)
    run.write(out_dir)
    skipped = 0
    paths = list_images(images)
    for path in paths:
        try:
            image = read_image(path)
        except DatasetError as e:
            logger.warning(f"Skipping {path}: {e}")
            skipped += 1
            continue

        result = detector.detect(image)
        write_annotations(result.points, out_dir / f"{path.stem}.csv")
        if viz:
            truth = None
            if annotations is not None and (annotations / f"{path.stem}.csv").exists():
                truth = read_annotations(annotations / f"{path.stem}.csv").points
            plot_landmarks_on_image(
                image, result.points, out_dir / "viz" / f"{path.stem}_overlay.png",
                ground_truth=truth, title=path.stem,
            )
            plot_similarity_maps(detector.similarity_maps(image), out_dir / "viz" / path.stem)

    click.echo(f"Detected landmarks on {len(paths) - skipped} of {len(paths)} images into {out_dir}")
    if skipped:
        click.echo(f"Skipped {skipped} unreadable images", err=True)
        sys.exit(EXIT_RUNTIME)
