"""
Tests for the typer command-line surface
"""
import json

from typer.testing import CliRunner

from cli import app
from models.inference import load_model
from services.report import RunReport

runner = CliRunner()


def write_curve(path, rates, psnrs):
    lines = ["rate,psnr"] + [f"{r},{p}" for r, p in zip(rates, psnrs)]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestBdCommand:
    def test_prints_both_deltas(self, tmp_path):
        ref = write_curve(tmp_path / "ref.csv", [100, 200, 400, 800], [30, 33, 36, 38.5])
        test = write_curve(tmp_path / "test.csv", [101, 202, 404, 808], [30, 33, 36, 38.5])
        result = runner.invoke(app, ["bd", "--ref", ref, "--test", test])
        assert result.exit_code == 0, result.output
        assert "BD-rate: +1.0000%" in result.output
        assert "BD-PSNR" in result.output

    def test_psnr_plateau_skips_rate(self, tmp_path):
        ref = write_curve(tmp_path / "ref.csv", [100, 200, 400, 800], [30, 33, 33, 38.5])
        result = runner.invoke(app, ["bd", "--ref", ref, "--test", ref])
        assert result.exit_code == 0, result.output
        assert "BD-rate: n/a" in result.output
        assert "0.0000 dB" in result.output

    def test_disjoint_curves_fail(self, tmp_path):
        ref = write_curve(tmp_path / "ref.csv", [100, 200, 400, 800], [30, 33, 36, 38.5])
        test = write_curve(tmp_path / "test.csv", [10000, 20000, 40000, 80000], [50, 53, 56, 58.5])
        result = runner.invoke(app, ["bd", "--ref", ref, "--test", test])
        assert result.exit_code == 1

    def test_missing_file(self, tmp_path):
        result = runner.invoke(app, ["bd", "--ref", str(tmp_path / "none.csv"), "--test", str(tmp_path / "x.csv")])
        assert result.exit_code == 1


class TestEncodeCommand:
    def test_reference_run_writes_report(self, small_clip, tmp_path):
        report_path = tmp_path / "run.json"
        result = runner.invoke(app, [
            "encode", "-i", small_clip, "--lo", "96x72", "--qp", "27", "--group", "3", "--train", "1",
            "--min-samples", "1", "--reference", "--jobs", "1", "--report", str(report_path),
        ])
        assert result.exit_code == 0, result.output
        assert "Node reduction" in result.output
        assert "Training-set errors per depth" in result.output
        report = RunReport.load(str(report_path))
        assert report.frame_count == 6
        assert report.qps[0].low_pass_identical

    def test_missing_input(self, tmp_path):
        result = runner.invoke(app, ["encode", "-i", str(tmp_path / "none.y4m"), "--lo", "96x72"])
        assert result.exit_code == 1

    def test_bad_schedule(self, small_clip):
        result = runner.invoke(app, ["encode", "-i", small_clip, "--lo", "96x72", "--group", "2", "--train", "3"])
        assert result.exit_code == 1

    def test_bad_dimensions(self, small_clip):
        result = runner.invoke(app, ["encode", "-i", small_clip, "--lo", "ninety"])
        assert result.exit_code != 0


class TestStageCommands:
    def test_dump_depthmaps(self, small_clip, tmp_path):
        output = tmp_path / "maps.qldp"
        result = runner.invoke(app, ["dump-depthmaps", "-i", small_clip, "-o", str(output),
                                     "--frames", "1", "--jobs", "1"])
        assert result.exit_code == 0, result.output
        assert output.stat().st_size > 0

    def test_train_only(self, small_clip, tmp_path):
        model_path = tmp_path / "model.txt"
        result = runner.invoke(app, ["train-only", "-i", small_clip, "--lo", "96x72", "--train", "2",
                                     "--model", str(model_path), "--jobs", "1"])
        assert result.exit_code == 0, result.output
        assert len(load_model(str(model_path)).depths) == 4


class TestSimulateCommand:
    def test_writes_json(self, tmp_path):
        out = tmp_path / "moments.json"
        result = runner.invoke(app, ["simulate", "--preset", "moments", "--replications", "100",
                                     "--out-json", str(out), "--jobs", "1"])
        assert result.exit_code == 0, result.output
        payload = json.loads(out.read_text())
        assert payload["preset"] == "moments"
        assert payload["report"]["replications"] == 100

    def test_unknown_preset(self):
        result = runner.invoke(app, ["simulate", "--preset", "nope", "--jobs", "1"])
        assert result.exit_code == 1
