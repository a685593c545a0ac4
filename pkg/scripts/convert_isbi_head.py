"""
Convert the ISBI 2015 cephalometric (Head) annotations to the toolkit's dataset layout.

Each source annotation is a text file per image whose first 19 lines hold ``x,y`` pixel
coordinates; the remaining lines are ignored. Images stay where they are: the manifest
points at the original image folder.
"""
import os
from pathlib import Path

import click

from oneshot_landmarks.evaldata.dataset import DatasetManifest, SpacingCalibration, write_annotations

HEAD_LANDMARKS = 19
HEAD_SPACING_MM = 0.1


def read_isbi_points(path: Path, count: int = HEAD_LANDMARKS):
    """First ``count`` ``x,y`` lines of an ISBI annotation file."""
    points = []
    for line in path.read_text().splitlines():
        if len(points) == count:
            break
        if not line.strip():
            continue
        x, y = line.replace(" ", "").split(",")[:2]
        points.append((float(x), float(y)))
    if len(points) != count:
        raise click.ClickException(f"{path} holds {len(points)} landmarks, expected {count}")
    return points


@click.command()
@click.argument('image_dir', type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.argument('annotation_dir', type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.argument('out_dir', type=click.Path(file_okay=False, path_type=Path))
@click.option('--template', 'template_id', default='001', show_default=True, help='Id of the template image')
@click.option('--first-test', type=int, default=151, show_default=True, help='First id of the test set')
@click.option('--last-test', type=int, default=400, show_default=True, help='Last id of the test set')
def convert(image_dir: Path, annotation_dir: Path, out_dir: Path, template_id: str, first_test: int, last_test: int):
    """
    Write index,x,y annotations and a manifest for IMAGE_DIR into OUT_DIR.

    The default test ids 151-400 are the 250 official test images.
    """
    labels = out_dir / "annotations"
    test_ids = [f"{i:03d}" for i in range(first_test, last_test + 1)]
    for sample_id in [template_id, *test_ids]:
        source = annotation_dir / f"{sample_id}.txt"
        if not source.exists():
            raise click.ClickException(f"missing annotation {source}")
        write_annotations(read_isbi_points(source), labels / f"{sample_id}.csv")

    manifest = DatasetManifest(
        name="isbi2015-head",
        image_dir=os.path.relpath(image_dir.resolve(), out_dir.resolve()),
        annotation_dir="annotations",
        landmark_count=HEAD_LANDMARKS,
        calibration=SpacingCalibration(spacing_mm=HEAD_SPACING_MM),
        template_id=template_id,
        test_ids=test_ids,
    )
    (out_dir / "manifest.json").write_text(manifest.model_dump_json(indent=2))
    click.echo(f"Converted {len(test_ids)} test images and template {template_id} into {out_dir}")


if __name__ == "__main__":
    convert()
