"""
CLI command for training decoders on the annotated template.
"""
from pathlib import Path
from typing import Optional

import click

from oneshot_landmarks.cli.common import (
    handle_errors,
    load_template,
    output_dir,
    resolve_run,
    run_options,
    setup_backbone,
)
from oneshot_landmarks.pipeline.bundle import save_bundle
from oneshot_landmarks.pipeline.detector import build_template_state
from oneshot_landmarks.pipeline.trainer import train_decoders


@click.command()
@run_options
@click.option('--dataset', type=click.Path(dir_okay=False, path_type=Path), default=None,
              help='Dataset manifest whose template is used')
@click.option('--template', type=click.Path(dir_okay=False, path_type=Path), default=None,
              help='Template image (instead of a dataset)')
@click.option('--landmarks', type=click.Path(dir_okay=False, path_type=Path), default=None,
              help='Template annotation CSV (index,x,y)')
@handle_errors
def train(config_path: Optional[Path], preset: Optional[str], seed: Optional[int], k: Optional[int],
          backbone: Optional[str], out: Optional[Path], dataset: Optional[Path],
          template: Optional[Path], landmarks: Optional[Path]):
    """
    Train the global and local decoders and write a detection bundle.

    The bundle, its loss history and run_config.json are written to the output directory.
    """
    extra = {}
    if dataset:
        extra["dataset"] = str(dataset)
    if template:
        extra["template_image"] = str(template)
    if landmarks:
        extra["template_landmarks"] = str(landmarks)
    run = resolve_run(config_path, preset, seed, k, backbone, out, extra)
    setup_backbone(run.backbone, run.descriptor_dir)

    image, lms = load_template(run)
    click.echo(f"Training on a {image.width}x{image.height} template with {lms.count} landmarks")
    result = train_decoders(image, lms, run.backbone, run.train)
    state = build_template_state(
        image, lms, run.backbone, run.train,
        decoders=(result.global_decoder, result.local_decoder),
        config_digest=run.digest(),
        inference=run.inference,
    )

    out_dir = output_dir(run)
    save_bundle(state, out_dir, result.loss_history)
    run.write(out_dir)
    click.echo(f"Bundle written to {out_dir}")
