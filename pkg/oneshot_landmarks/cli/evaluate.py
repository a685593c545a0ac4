"""
CLI command for evaluating a bundle on a dataset.
"""
from pathlib import Path
from typing import Optional

import click
from tabulate import tabulate

from oneshot_landmarks.cli.common import (
    bundle_defaults,
    handle_errors,
    load_run_dataset,
    output_dir,
    resolve_run,
    run_options,
    setup_backbone,
)
from oneshot_landmarks.evaldata.report import EvalReport, evaluate as evaluate_dataset, replay_report, write_report
from oneshot_landmarks.pipeline.bundle import load_bundle
from oneshot_landmarks.pipeline.detector import LandmarkDetector
from oneshot_landmarks.utils.config import ConfigurationError


def echo_report(report: EvalReport) -> None:
    """Print MRE and the SDR table."""
    click.echo(f"MRE: {report.mre_mm:.3f} mm")
    if report.coarse_mre_mm is not None:
        click.echo(f"Coarse MRE: {report.coarse_mre_mm:.3f} mm")
    rows = [[f"{t:g} mm", f"{v:.2f}%"] for t, v in zip(report.thresholds_mm, report.sdr_values())]
    click.echo(tabulate(rows, headers=["threshold", "SDR"]))


@click.command()
@click.option('--bundle', type=click.Path(exists=True, file_okay=False, path_type=Path), default=None,
              help='Trained bundle directory')
@click.option('--dataset', type=click.Path(dir_okay=False, path_type=Path), default=None,
              help='Dataset manifest')
@click.option('--replay', type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None,
              help='Recompute the report from a per_point_errors.csv instead of detecting')
@run_options
@handle_errors
def evaluate(bundle: Optional[Path], dataset: Optional[Path], replay: Optional[Path], config_path: Optional[Path],
             preset: Optional[str], seed: Optional[int], k: Optional[int], backbone: Optional[str],
             out: Optional[Path]):
    """
    Evaluate a bundle on a dataset's test images and write report.json and per_point_errors.csv.

    SDR thresholds come from the preset (head: 2/2.5/3/4 mm, hand: 2/4/10 mm) or the config.
    The bundle's stored matching settings apply unless overridden.
    """
    extra = {"dataset": str(dataset)} if dataset else None
    if replay is not None:
        run = resolve_run(config_path, preset, seed, k, backbone, out, extra)
        out_dir = output_dir(run)
        report = replay_report(replay, run.thresholds_mm)
    else:
        if bundle is None:
            raise ConfigurationError("Pass --bundle, or --replay with a per-point CSV")
        state, _ = load_bundle(bundle)
        run = resolve_run(config_path, preset, seed, k, backbone, out, extra, base=bundle_defaults(state))
        out_dir = output_dir(run)
        data = load_run_dataset(run)
        setup_backbone(state.backbone, run.descriptor_dir)
        detector = LandmarkDetector(state, run.inference)
        report = evaluate_dataset(data, detector, run.thresholds_mm, workers=run.workers, progress=run.train.progress)

    write_report(report, out_dir)
    run.write(out_dir)
    echo_report(report)
    click.echo(f"Report written to {out_dir}")
