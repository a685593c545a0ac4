"""
Convert the Hand radiograph annotations (one CSV row of 37 points per image) to the
toolkit's dataset layout.

Rows read ``image_id,x0,y0,x1,y1,...``. Spacing is derived per image from the two wrist
endpoints, assumed 50 mm apart.
"""
import csv
import os
from pathlib import Path

import click

from oneshot_landmarks.evaldata.dataset import DatasetManifest, WristCalibration, write_annotations

HAND_LANDMARKS = 37


def read_hand_rows(path: Path, count: int = HAND_LANDMARKS):
    """Map image id to its landmark list."""
    rows = {}
    with path.open(newline="") as handle:
        for line_no, row in enumerate(csv.reader(handle), start=1):
            if not row:
                continue
            values = [float(v) for v in row[1:1 + 2 * count]]
            if len(values) != 2 * count:
                raise click.ClickException(f"{path}:{line_no}: expected {count} points")
            rows[row[0].strip()] = list(zip(values[0::2], values[1::2]))
    return rows


@click.command()
@click.argument('image_dir', type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.argument('csv_path', type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument('out_dir', type=click.Path(file_okay=False, path_type=Path))
@click.option('--template', 'template_id', required=True, help='Id of the template image')
@click.option('--wrist', nargs=2, type=int, default=(1, 5), show_default=True,
              help='Zero-based indices of the wrist endpoints')
def convert(image_dir: Path, csv_path: Path, out_dir: Path, template_id: str, wrist):
    """
    Write index,x,y annotations and a manifest for IMAGE_DIR into OUT_DIR.

    Every annotated image other than the template becomes a test image.
    """
    rows = read_hand_rows(csv_path)
    if template_id not in rows:
        raise click.ClickException(f"template {template_id} has no row in {csv_path}")
    for sample_id, points in rows.items():
        write_annotations(points, out_dir / "annotations" / f"{sample_id}.csv")

    manifest = DatasetManifest(
        name="hand",
        image_dir=os.path.relpath(image_dir.resolve(), out_dir.resolve()),
        annotation_dir="annotations",
        landmark_count=HAND_LANDMARKS,
        calibration=WristCalibration(wrist_pair=tuple(wrist)),
        template_id=template_id,
        test_ids=sorted(i for i in rows if i != template_id),
    )
    (out_dir / "manifest.json").write_text(manifest.model_dump_json(indent=2))
    click.echo(f"Converted {len(rows)} images into {out_dir}")


if __name__ == "__main__":
    convert()
