"""
CLI command for ablation sweeps.
"""
from pathlib import Path
from typing import List, Optional, Tuple

import click
from tabulate import tabulate

from oneshot_landmarks.ablation import DEFAULT_LAYERS, GRIDS, AblationRow, run_ablation, write_ablation
from oneshot_landmarks.cli.common import (
    handle_errors,
    load_run_dataset,
    output_dir,
    resolve_run,
    run_options,
    setup_backbone,
)
from oneshot_landmarks.evaldata.dataset import load_dataset
from oneshot_landmarks.synth import SynthParams, generate_synthetic_dataset


def _int_list(ctx, param, value: Optional[str]) -> Tuple[int, ...]:
    if not value:
        return DEFAULT_LAYERS
    try:
        return tuple(int(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter("expected comma separated integers, e.g. 3,6,9")


@click.command()
@click.option('--grid', 'grids', type=click.Choice(GRIDS), multiple=True, default=("stages",), show_default=True,
              help='Ablation grid; repeat to run several')
@click.option('--dataset', type=click.Path(dir_okay=False, path_type=Path), default=None,
              help='Dataset manifest (a synthetic benchmark is generated when omitted)')
@click.option('--layers', callback=_int_list, default=None, help='Layers for the layer grid, e.g. 3,6,9,12')
@click.option('--models', default=None, help='Adapter names for the model grid, comma separated')
@run_options
@handle_errors
def ablate(grids: Tuple[str, ...], dataset: Optional[Path], layers: Tuple[int, ...], models: Optional[str],
           config_path: Optional[Path], preset: Optional[str], seed: Optional[int], k: Optional[int],
           backbone: Optional[str], out: Optional[Path]):
    """
    Compare configurations and write ablation.csv and ablation.md.

    Without --dataset, --config or --preset the synthetic preset and a freshly generated
    synthetic benchmark are used.
    """
    if dataset is None and config_path is None and preset is None:
        preset = "synthetic"
    run = resolve_run(config_path, preset, seed, k, backbone, out, {"dataset": str(dataset)} if dataset else None)
    out_dir = output_dir(run)

    if run.dataset:
        data = load_run_dataset(run)
    else:
        click.echo("No dataset configured, generating the synthetic benchmark")
        manifest = generate_synthetic_dataset(out_dir / "synthetic_data", SynthParams(seed=run.seed))
        data = load_dataset(manifest)

    model_names = [m.strip() for m in models.split(",")] if models else None
    setup_backbone(run.backbone, run.descriptor_dir)
    for name in model_names or []:
        setup_backbone(run.backbone.model_copy(update={"kind": "external-vit", "model": name}), run.descriptor_dir)

    rows: List[AblationRow] = []
    for grid in grids:
        rows.extend(run_ablation(grid, data, run, layers=layers, models=model_names, progress=run.train.progress))

    write_ablation(rows, run.thresholds_mm, out_dir)
    run.write(out_dir)
    click.echo(tabulate([[r.grid, r.setting, f"{r.mre_mm:.3f}"] for r in rows], headers=["grid", "setting", "MRE (mm)"]))
    click.echo(f"Ablation tables written to {out_dir}")
