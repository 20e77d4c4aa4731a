"""Cross-component acceptance: emissions must satisfy the toolkit's interfaces.

The toolkit is exercised strictly through its CLI and file formats
(subprocess), never imported.
"""

import json
import subprocess
import sys

from oodadapters.config import AdapterConfig
from oodadapters.runner import run_inference
from oodadapters.validate import validate_output

from conftest import FIXTURES


def toolkit(*args):
    return subprocess.run(
        [sys.executable, "-m", "oodeval", *map(str, args)],
        capture_output=True,
        text=True,
    )


class TestEmissionContract:
    def test_smoke_emission_passes_toolkit_validate(self, smoke_images, tmp_path):
        """Acceptance: every emission accepted (exit 0) on the 5-image set."""
        config = AdapterConfig(
            model="synthetic",
            prompts=("foreground objects", "objects on road"),
            tta=("hflip", "rot90cw", "rot90ccw"),
            roi_prompt="road",
        )
        result = run_inference(config, smoke_images, tmp_path / "preds.json")
        assert validate_output(result.predictions, result.image_records) == 0
        for path in result.tta_predictions.values():
            assert validate_output(path) == 0

    def test_validate_cli_accepts_fresh_emission(self, smoke_images, tmp_path):
        from oodadapters.cli import main

        out = tmp_path / "preds.json"
        assert main([
            "run", "--model", "synthetic", "--prompts", "objects",
            "--images", str(smoke_images), "--out", str(out),
        ]) == 0
        assert main(["validate", str(out), "--images", str(tmp_path / "preds.images.json")]) == 0

    def test_corrupted_score_rejected(self, smoke_images, tmp_path):
        config = AdapterConfig(model="synthetic", prompts=("objects",))
        result = run_inference(config, smoke_images, tmp_path / "preds.json")
        payload = json.loads(result.predictions.read_text())
        payload["entries"][0]["score"] = 1.5
        corrupted = tmp_path / "corrupted.json"
        corrupted.write_text(json.dumps(payload))
        assert validate_output(corrupted) != 0

    def test_empty_image_dir_emission_still_validates(self, tmp_path):
        (tmp_path / "empty").mkdir()
        config = AdapterConfig(model="synthetic", prompts=("objects",))
        result = run_inference(config, tmp_path / "empty", tmp_path / "preds.json")
        assert validate_output(result.predictions, result.image_records) == 0

    def test_tta_emission_merges_through_toolkit(self, smoke_images, tmp_path):
        config = AdapterConfig(
            model="synthetic", prompts=("objects",), tta=("hflip",)
        )
        result = run_inference(config, smoke_images, tmp_path / "preds.json")
        merged = tmp_path / "merged.json"
        completed = toolkit(
            "tta-merge",
            "--predictions", result.predictions,
            "--images", result.image_records,
            "--augmented", f"hflip={result.tta_predictions['horizontal_flip']}",
            "--out", merged,
        )
        assert completed.returncode == 0, completed.stderr
        assert validate_output(merged, result.image_records) == 0


class TestRecordedFixtureReplay:
    """Acceptance: the checked-in recorded output replays to a stable report."""

    def test_fixture_still_validates(self):
        assert validate_output(
            FIXTURES / "recorded_predictions.json", FIXTURES / "image_records.json"
        ) == 0

    def test_fuse_half_half_reproduces_golden_report(self, tmp_path):
        out_dir = tmp_path / "out"
        completed = toolkit(
            "fuse",
            "--ground-truth", FIXTURES / "ground_truth.json",
            "--predictions", FIXTURES / "recorded_predictions.json",
            "--out-dir", out_dir,
            "--weights", "0.5,0.5",
        )
        assert completed.returncode == 0, completed.stderr
        produced = (out_dir / "report.csv").read_bytes()
        golden = (FIXTURES / "golden_fused_report.csv").read_bytes()
        assert produced == golden
        fused = (out_dir / "fused.json").read_bytes()
        golden_fused = (FIXTURES / "golden_fused_predictions.json").read_bytes()
        assert fused == golden_fused

    def test_replay_is_deterministic_across_runs(self, tmp_path):
        reports = []
        for run in range(2):
            out_dir = tmp_path / f"out{run}"
            completed = toolkit(
                "fuse",
                "--ground-truth", FIXTURES / "ground_truth.json",
                "--predictions", FIXTURES / "recorded_predictions.json",
                "--out-dir", out_dir,
                "--weights", "0.5,0.5",
            )
            assert completed.returncode == 0, completed.stderr
            reports.append((out_dir / "report.csv").read_bytes())
        assert reports[0] == reports[1]
