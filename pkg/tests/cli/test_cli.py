"""
Tests for the command-line interface.
"""
import csv
import json
import shutil
import tempfile
from pathlib import Path
from unittest.mock import patch

from click.testing import CliRunner

from oneshot_landmarks.ablation import AblationRow
from oneshot_landmarks.cli.main import cli

TINY_CONFIG = {
    "preset": "synthetic",
    "backbone": {"kind": "synthetic-positional"},
    "train": {
        "iters_global": 2,
        "iters_local": 2,
        "aug_count": 4,
        "batch": 2,
        "short_side": 64,
        "crop_size": 32,
        "crop_jitter": 2.0,
        "decoder": {"out_dim": 8},
        "progress": False,
    },
}


class TestCliHelp:
    """Test that every command is registered."""

    def setup_method(self):
        self.runner = CliRunner()

    def test_group_lists_commands(self):
        result = self.runner.invoke(cli, ['--help'])
        assert result.exit_code == 0
        for command in ("train", "detect", "evaluate", "ablate", "synth"):
            assert command in result.output

    def test_train_help(self):
        result = self.runner.invoke(cli, ['train', '--help'])
        assert result.exit_code == 0
        assert "--preset" in result.output
        assert "--backbone" in result.output


class TestCliCommands:
    """Test the commands against a small synthetic dataset."""

    def setup_method(self):
        self.runner = CliRunner()
        self.test_dir = Path(tempfile.mkdtemp())
        self.data_dir = self.test_dir / "data"
        self.config = self.test_dir / "tiny.json"
        self.config.write_text(json.dumps(TINY_CONFIG))

    def teardown_method(self):
        shutil.rmtree(self.test_dir)

    def _synth(self):
        result = self.runner.invoke(cli, ['synth', str(self.data_dir), '--queries', '2', '--landmarks', '3',
                                          '--size', '64', '--seed', '7'])
        assert result.exit_code == 0, result.output
        return self.data_dir / "manifest.json"

    def test_synth_writes_dataset(self):
        manifest = json.loads(self._synth().read_text())
        assert manifest["template_id"] == "0000"
        assert manifest["test_ids"] == ["0001", "0002"]
        assert len(list((self.data_dir / "images").glob("*.png"))) == 3
        with (self.data_dir / "annotations" / "0001.csv").open(newline="") as handle:
            assert len(list(csv.reader(handle))) == 1 + 3
        assert (self.data_dir / "run_config.json").exists()

    def test_synth_is_deterministic(self):
        self._synth()
        first = (self.data_dir / "annotations" / "0002.csv").read_text()
        shutil.rmtree(self.data_dir)
        self._synth()
        assert (self.data_dir / "annotations" / "0002.csv").read_text() == first

    def test_train_missing_template_exits_2(self):
        missing = self.test_dir / "nope.png"
        result = self.runner.invoke(cli, ['train', '--template', str(missing), '--landmarks', str(missing),
                                          '--config', str(self.config), '--out', str(self.test_dir / "b")])
        assert result.exit_code == 2
        assert "nope.png" in result.output

    def test_train_without_template_exits_2(self):
        result = self.runner.invoke(cli, ['train', '--out', str(self.test_dir / "b")])
        assert result.exit_code == 2
        assert "No template" in result.output

    def test_unknown_external_model_exits_2(self):
        config = dict(TINY_CONFIG, backbone={"kind": "external-vit", "model": "unknown-vit"})
        self.config.write_text(json.dumps(config))
        result = self.runner.invoke(cli, ['train', '--config', str(self.config), '--dataset', str(self._synth()),
                                          '--out', str(self.test_dir / "b")])
        assert result.exit_code == 2
        assert "unknown-vit" in result.output

    def test_train_detect_evaluate(self):
        manifest = self._synth()
        bundle = self.test_dir / "bundle"
        result = self.runner.invoke(cli, ['train', '--config', str(self.config), '--dataset', str(manifest),
                                          '--out', str(bundle)])
        assert result.exit_code == 0, result.output
        assert (bundle / "bundle.json").exists()
        assert (bundle / "loss_history.csv").exists()
        digest = json.loads((bundle / "run_config.json").read_text())["digest"]
        assert json.loads((bundle / "bundle.json").read_text())["config_digest"] == digest

        detections = self.test_dir / "detections"
        result = self.runner.invoke(cli, ['detect', str(bundle), str(self.data_dir / "images"),
                                          '--out', str(detections), '--viz',
                                          '--annotations', str(self.data_dir / "annotations")])
        assert result.exit_code == 0, result.output
        for stem in ("0000", "0001", "0002"):
            with (detections / f"{stem}.csv").open(newline="") as handle:
                assert len(list(csv.reader(handle))) == 1 + 3
            assert (detections / "viz" / f"{stem}_overlay.png").exists()
            assert len(list((detections / "viz" / stem).glob("similarity_*.png"))) == 3

        report_dir = self.test_dir / "report"
        result = self.runner.invoke(cli, ['evaluate', '--bundle', str(bundle), '--dataset', str(manifest),
                                          '--config', str(self.config), '--out', str(report_dir)])
        assert result.exit_code == 0, result.output
        assert "MRE" in result.output
        report = json.loads((report_dir / "report.json").read_text())
        assert len(report["per_point"]) == 2 * 3

        replay_dir = self.test_dir / "replay"
        result = self.runner.invoke(cli, ['evaluate', '--replay', str(report_dir / "per_point_errors.csv"),
                                          '--config', str(self.config), '--out', str(replay_dir)])
        assert result.exit_code == 0, result.output
        replayed = json.loads((replay_dir / "report.json").read_text())
        assert replayed["mre_mm"] == report["mre_mm"]
        assert replayed["sdr"] == report["sdr"]

    def test_detect_without_viz_writes_only_csv(self):
        manifest = self._synth()
        bundle = self.test_dir / "bundle"
        self.runner.invoke(cli, ['train', '--config', str(self.config), '--dataset', str(manifest),
                                 '--out', str(bundle)])
        detections = self.test_dir / "detections"
        result = self.runner.invoke(cli, ['detect', str(bundle), str(self.data_dir / "images" / "0001.png"),
                                          '--out', str(detections)])
        assert result.exit_code == 0, result.output
        assert (detections / "0001.csv").exists()
        assert not (detections / "viz").exists()

    def test_detect_reports_unreadable_images(self):
        manifest = self._synth()
        bundle = self.test_dir / "bundle"
        self.runner.invoke(cli, ['train', '--config', str(self.config), '--dataset', str(manifest),
                                 '--out', str(bundle)])
        images = self.test_dir / "queries"
        images.mkdir()
        shutil.copy(self.data_dir / "images" / "0001.png", images / "good.png")
        (images / "broken.png").write_text("not an image")
        result = self.runner.invoke(cli, ['detect', str(bundle), str(images), '--out', str(self.test_dir / "d")])
        assert result.exit_code == 1
        assert "Skipped 1" in result.output
        assert (self.test_dir / "d" / "good.csv").exists()

    def test_detect_uses_bundle_inference_unless_overridden(self):
        manifest = self._synth()
        self.config.write_text(json.dumps(dict(TINY_CONFIG, inference={"k": 5, "stages": "global"})))
        bundle = self.test_dir / "bundle"
        result = self.runner.invoke(cli, ['train', '--config', str(self.config), '--dataset', str(manifest),
                                          '--out', str(bundle)])
        assert result.exit_code == 0, result.output
        assert json.loads((bundle / "bundle.json").read_text())["inference"]["k"] == 5

        query = str(self.data_dir / "images" / "0001.png")
        stored = self.test_dir / "stored"
        result = self.runner.invoke(cli, ['detect', str(bundle), query, '--out', str(stored)])
        assert result.exit_code == 0, result.output
        inference = json.loads((stored / "run_config.json").read_text())["config"]["inference"]
        assert inference == {"k": 5, "matching": "bdm", "stages": "global"}

        flagged = self.test_dir / "flagged"
        result = self.runner.invoke(cli, ['detect', str(bundle), query, '--k', '2', '--out', str(flagged)])
        assert result.exit_code == 0, result.output
        inference = json.loads((flagged / "run_config.json").read_text())["config"]["inference"]
        assert inference == {"k": 2, "matching": "bdm", "stages": "global"}

    def test_evaluate_needs_bundle_or_replay(self):
        result = self.runner.invoke(cli, ['evaluate', '--out', str(self.test_dir / "r")])
        assert result.exit_code == 2

    @patch("oneshot_landmarks.cli.ablate.run_ablation")
    def test_ablate_writes_tables(self, mock_run):
        mock_run.return_value = [
            AblationRow(grid="loss", setting=loss, matching="bdm", stages="global", mre_mm=1.0 + i,
                        sdr={"2.0": 50.0, "4.0": 75.0, "10.0": 100.0})
            for i, loss in enumerate(("distance-aware", "onehot-mse", "contrastive"))
        ]
        manifest = self._synth()
        out = self.test_dir / "ablation"
        result = self.runner.invoke(cli, ['ablate', '--grid', 'loss', '--dataset', str(manifest),
                                          '--preset', 'synthetic', '--out', str(out)])
        assert result.exit_code == 0, result.output
        assert mock_run.call_args.args[0] == "loss"
        with (out / "ablation.csv").open(newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["grid", "setting", "matching", "stages", "mre_mm", "sdr_2mm", "sdr_4mm", "sdr_10mm"]
        assert [r[1] for r in rows[1:]] == ["distance-aware", "onehot-mse", "contrastive"]
        assert "| grid" in (out / "ablation.md").read_text()

    def test_ablate_rejects_bad_layers(self):
        result = self.runner.invoke(cli, ['ablate', '--layers', 'three', '--out', str(self.test_dir / "a")])
        assert result.exit_code == 2
