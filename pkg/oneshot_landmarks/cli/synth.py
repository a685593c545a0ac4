"""
CLI command for generating the synthetic benchmark.
"""
from pathlib import Path

import click

from oneshot_landmarks.cli.common import handle_errors, resolve_run
from oneshot_landmarks.synth import SynthParams, generate_synthetic_dataset


@click.command()
@click.argument('out_dir', type=click.Path(file_okay=False, path_type=Path))
@click.option('--queries', type=click.IntRange(min=0), default=50, show_default=True, help='Number of query images')
@click.option('--landmarks', type=click.IntRange(min=1), default=5, show_default=True, help='Landmarks per image')
@click.option('--size', type=click.IntRange(min=16), default=96, show_default=True, help='Image side in pixels')
@click.option('--seed', type=int, default=0, show_default=True, help='Generator seed')
@handle_errors
def synth(out_dir: Path, queries: int, landmarks: int, size: int, seed: int):
    """
    Generate a synthetic dataset into OUT_DIR.

    Sample 0 is the template; queries are affine plus smooth elastic warps of it with
    exactly known landmarks.
    """
    params = SynthParams(queries=queries, landmark_count=landmarks, height=size, width=size, seed=seed)
    manifest = generate_synthetic_dataset(out_dir, params)
    run = resolve_run(None, "synthetic", seed, None, None, out_dir, {"dataset": str(manifest)})
    run.write(out_dir)
    click.echo(f"Wrote {queries} queries and the template to {out_dir} (manifest {manifest.name})")
