"""
Integration tests for the command line
Runs the subcommands against temporary files and checks exit codes and artifacts
"""

import json
import math
import os
import sys

import numpy as np
import pandas as pd
import pytest

# Add parent directory to path to import metricsmith
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../')))

from metricsmith.cli.ingest import load_predictions, parse_predictions, write_predictions
from metricsmith.cli.main import main
from metricsmith.core import ClassificationData, LabelSpace, RegressionData, TaskType, validate_classification
from metricsmith.errors import InvalidLabelSpace, MalformedInput

FOUR_ROW_SCORED = (
    "y_true,score_0,score_1\n"
    "1,0.2,0.8\n"
    "0,0.6,0.4\n"
    "1,0.6,0.4\n"
    "0,0.8,0.2\n"
)

RANKED_FOUR = (
    "y_true,score_0,score_1\n"
    "1,0.1,0.9\n"
    "0,0.2,0.8\n"
    "1,0.3,0.7\n"
    "0,0.9,0.1\n"
)

HARD_ONLY = "y_true,y_pred\n" + "".join(f"{t},{p}\n" for t, p in [(0, 0), (1, 1), (0, 1), (1, 1)] * 5)

CLEAN_REGRESSION = (
    "y_true,y_pred\n"
    "10.0,10.5\n"
    "12.0,11.0\n"
    "14.0,14.5\n"
    "16.0,15.0\n"
    "18.0,18.5\n"
    "20.0,19.0\n"
    "22.0,22.5\n"
    "24.0,23.0\n"
)


def read_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


@pytest.mark.integration
class TestIngest:
    """Test cases for prediction file parsing and writing"""

    def test_regression_rows(self, write_csv):
        """Test a three-row regression file"""
        data = parse_predictions(write_csv("y_true,y_pred\n1.0,1.1\n2.0,1.9\n3.0,3.2\n"), TaskType.REGRESSION)
        assert isinstance(data, RegressionData)
        assert len(data) == 3
        assert data.y_pred.tolist() == [1.1, 1.9, 3.2]

    def test_scores_without_hard_predictions(self, write_csv):
        """Test that score columns define the classes and hard labels come from the argmax"""
        data = parse_predictions(write_csv(FOUR_ROW_SCORED), TaskType.CLASSIFICATION)
        assert data.labels.classes == ("0", "1")
        assert data.labels.positive == "1"
        assert data.pred_index().tolist() == [1, 0, 0, 0]

    def test_non_finite_cell_names_the_row(self, write_csv):
        """Test that a NaN cell is reported by data row and column"""
        path = write_csv("y_true,y_pred\n1.0,1.1\nnan,2.0\n")
        with pytest.raises(MalformedInput) as excinfo:
            parse_predictions(path, TaskType.REGRESSION)
        assert excinfo.value.row == 2
        assert excinfo.value.column == "y_true"
        assert "row 2" in str(excinfo.value)

    def test_missing_column(self, write_csv):
        """Test that a regression file needs y_pred"""
        with pytest.raises(MalformedInput):
            parse_predictions(write_csv("y_true\n1.0\n"), TaskType.REGRESSION)

    def test_fold_column(self, write_csv):
        """Test that an integer fold column is kept and a fractional one rejected"""
        loaded = load_predictions(write_csv("y_true,y_pred,fold\n1,1,0\n2,2,1\n3,3,1\n"), TaskType.REGRESSION)
        assert loaded.folds.tolist() == [0, 1, 1]
        assert [len(f) for f in loaded.fold_sets()] == [1, 2]
        with pytest.raises(MalformedInput):
            load_predictions(write_csv("y_true,y_pred,fold\n1,1,0.5\n", name="bad.csv"), TaskType.REGRESSION)

    def test_written_scores_read_back_exactly(self, tmp_path):
        """Test that written probabilities survive a write and a read bit for bit"""
        rng = np.random.default_rng(3)
        positive = rng.random(50)
        scores = np.column_stack([1.0 - positive, positive])
        labels = LabelSpace(("neg", "pos"))
        truth = np.where(rng.random(50) < positive, "pos", "neg")
        data = validate_classification(ClassificationData(labels, truth, y_score=scores))
        path = write_predictions(data, tmp_path / "out" / "predictions.csv")
        restored = parse_predictions(path, TaskType.CLASSIFICATION)
        np.testing.assert_array_equal(restored.y_score, data.y_score)
        np.testing.assert_array_equal(restored.y_true, data.y_true)

    def test_unscored_round_trip_keeps_label_space(self, tmp_path):
        """Test that a supplied label space restores unused classes and class order"""
        labels = LabelSpace(("c", "a", "b"))
        data = validate_classification(ClassificationData(labels, ["a", "c", "a", "c"], ["c", "c", "a", "a"]))
        path = write_predictions(data, tmp_path / "unscored.csv")
        inferred = parse_predictions(path, TaskType.CLASSIFICATION)
        assert inferred.labels.classes == ("a", "c")
        restored = parse_predictions(path, TaskType.CLASSIFICATION, labels=data.labels)
        assert restored.labels.classes == ("c", "a", "b")
        np.testing.assert_array_equal(restored.y_true, data.y_true)
        np.testing.assert_array_equal(restored.y_pred, data.y_pred)

    def test_single_class_round_trip(self, tmp_path):
        """Test that a file holding one observed class reads back under its binary label space"""
        labels = LabelSpace(("neg", "pos"))
        data = validate_classification(ClassificationData(labels, ["pos"] * 3, ["pos"] * 3))
        path = write_predictions(data, tmp_path / "single.csv")
        restored = parse_predictions(path, TaskType.CLASSIFICATION, labels=labels)
        assert restored.labels == labels
        assert restored.labels.positive == "pos"
        np.testing.assert_array_equal(restored.y_true, data.y_true)
        np.testing.assert_array_equal(restored.y_pred, data.y_pred)

    def test_label_space_must_match_score_columns(self, write_csv):
        """Test that score columns disagreeing with a supplied label space are rejected"""
        with pytest.raises(InvalidLabelSpace):
            parse_predictions(write_csv(FOUR_ROW_SCORED), TaskType.CLASSIFICATION, labels=LabelSpace(("1", "0")))
        restored = parse_predictions(write_csv(FOUR_ROW_SCORED), TaskType.CLASSIFICATION, labels=LabelSpace(("0", "1")))
        assert restored.labels.classes == ("0", "1")

    def test_ragged_row_reports_position(self, write_csv):
        """Test that a row with extra fields is reported by its data row"""
        with pytest.raises(MalformedInput) as excinfo:
            parse_predictions(write_csv("y_true,y_pred\n1,1\n0,0,7\n"), TaskType.CLASSIFICATION)
        assert excinfo.value.row == 2
        assert "row 2" in str(excinfo.value)


@pytest.mark.integration
class TestEvaluateCommand:
    """Test cases for `metricsmith evaluate`"""

    @pytest.mark.slow
    def test_imbalanced_regime(self, tmp_path):
        """Test that a 95/5 regime raises SevereImbalance and PR AUC sits below accuracy"""
        out = tmp_path / "run"
        code = main([
            "evaluate", "--regime", "imbalanced_binary", "--n", "20000",
            "--metric", "accuracy", "--metric", "mcc", "--metric", "pr_auc", "--metric", "roc_auc",
            "--validation", "stratified_kfold(5)", "--seed", "7", "--out", str(out),
        ])
        assert code == 0
        report = read_json(out / "report.json")
        codes = [flag["code"] for flag in report["flags"]]
        assert "SevereImbalance" in codes
        assert report["metrics"]["pr_auc"]["mean"] < report["metrics"]["accuracy"]["mean"]
        assert len(report["metrics"]["accuracy"]["per_fold"]) == 5
        assert report["provenance"]["seed"] == 7

    def test_infeasible_metric_exit_codes(self, tmp_path, write_csv):
        """Test exit 3 for ROC AUC without scores, and a recorded flag in permissive mode"""
        path = write_csv(HARD_ONLY)
        base = ["evaluate", "--input", path, "--task", "classification", "--metric", "accuracy",
                "--metric", "roc_auc", "--validation", "kfold(2)"]
        assert main(base + ["--out", str(tmp_path / "strict")]) == 3
        assert not (tmp_path / "strict" / "report.json").exists()

        assert main(base + ["--permissive", "--out", str(tmp_path / "lenient")]) == 0
        report = read_json(tmp_path / "lenient" / "report.json")
        assert "roc_auc" not in report["metrics"]
        assert "MetricInfeasible" in [flag["code"] for flag in report["flags"]]

    def test_repeatable_output(self, tmp_path, write_csv):
        """Test that two runs with the same seed write byte-identical JSON"""
        rows = "".join(f"{i % 2},{1 - 0.02 * i:.2f},{0.02 * i:.2f}\n" for i in range(1, 31))
        path = write_csv("y_true,score_0,score_1\n" + rows)
        args = ["evaluate", "--input", path, "--task", "classification", "--validation", "stratified_kfold(3)",
                "--seed", "11"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b")]) == 0
        first = (tmp_path / "a" / "report.json").read_bytes()
        assert first == (tmp_path / "b" / "report.json").read_bytes()

    def test_roc_export(self, tmp_path, write_csv):
        """Test that four distinct scores export four curve rows after the sentinel"""
        path = write_csv(RANKED_FOUR)
        out = tmp_path / "curves"
        code = main(["evaluate", "--input", path, "--task", "classification", "--validation", "none",
                     "--metric", "roc_auc", "--format", "curves", "--out", str(out)])
        assert code == 0
        roc = pd.read_csv(out / "roc.csv")
        assert list(roc.columns) == ["x", "y", "threshold"]
        assert len(roc) == 5
        assert math.isinf(roc["threshold"].iloc[0])
        assert roc["x"].tolist() == [0.0, 0.0, 0.5, 0.5, 1.0]
        assert roc["y"].tolist() == [0.0, 0.5, 0.5, 1.0, 1.0]
        assert (out / "pr.csv").exists()
        assert (out / "reliability.csv").exists()

    def test_roc_export_of_tied_scores(self, tmp_path, write_csv):
        """Test that a tied score pair collapses into one exported step"""
        out = tmp_path / "tied"
        code = main(["evaluate", "--input", write_csv(FOUR_ROW_SCORED), "--task", "classification",
                     "--validation", "none", "--metric", "roc_auc", "--format", "curves", "--out", str(out)])
        assert code == 0
        roc = pd.read_csv(out / "roc.csv")
        assert roc["x"].tolist() == [0.0, 0.0, 0.5, 1.0]
        assert roc["y"].tolist() == [0.0, 0.5, 1.0, 1.0]

    def test_markdown_without_flags(self, tmp_path, write_csv):
        """Test that a clean regression run renders 'no flags'"""
        path = write_csv(CLEAN_REGRESSION)
        out = tmp_path / "md"
        code = main(["evaluate", "--input", path, "--task", "regression", "--validation", "kfold(2)",
                     "--format", "json", "--format", "markdown", "--out", str(out)])
        assert code == 0
        assert read_json(out / "report.json")["flags"] == []
        text = (out / "report.md").read_text(encoding="utf-8")
        assert "no flags" in text
        assert "| mae |" in text

    def test_usage_and_config_errors(self, tmp_path, write_csv, capsys):
        """Test exit 1 for bad arguments and incomplete configs"""
        path = write_csv(CLEAN_REGRESSION)
        assert main(["evaluate", "--format", "xml"]) == 1
        assert main(["evaluate", "--input", path, "--out", str(tmp_path)]) == 1
        assert main(["evaluate", "--input", path, "--task", "regression",
                     "--validation", "stratified_kfold(5)", "--out", str(tmp_path)]) == 1
        assert main(["evaluate", "--input", path, "--task", "regression", "--metric", "accuracy",
                     "--out", str(tmp_path)]) == 1
        assert main(["frobnicate"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_data_errors(self, tmp_path, write_csv, capsys):
        """Test exit 2 for missing and malformed input"""
        assert main(["evaluate", "--input", str(tmp_path / "absent.csv"), "--task", "regression",
                     "--out", str(tmp_path)]) == 2
        bad = write_csv("y_true,y_pred\n1.0,1.1\nnan,2.0\n", name="bad.csv")
        assert main(["evaluate", "--input", bad, "--task", "regression", "--out", str(tmp_path)]) == 2
        assert "row 2" in capsys.readouterr().err

    def test_unwritable_output(self, tmp_path, write_csv):
        """Test exit 4 when the output directory cannot be created"""
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory", encoding="utf-8")
        path = write_csv(CLEAN_REGRESSION)
        code = main(["evaluate", "--input", path, "--task", "regression", "--validation", "kfold(2)",
                     "--out", str(blocker / "sub")])
        assert code == 4

    def test_config_file(self, tmp_path):
        """Test a JSON run config whose relative input resolves next to the file"""
        (tmp_path / "inputs").mkdir()
        (tmp_path / "inputs" / "predictions.csv").write_text(CLEAN_REGRESSION, encoding="utf-8")
        config = tmp_path / "inputs" / "run.json"
        config.write_text(json.dumps({
            "task": "regression",
            "input": "predictions.csv",
            "metrics": ["mae", "rmse"],
            "validation": "kfold(2)",
            "seed": 5,
            "out_dir": str(tmp_path / "from_config"),
        }), encoding="utf-8")
        assert main(["evaluate", "--config", str(config)]) == 0
        report = read_json(tmp_path / "from_config" / "report.json")
        assert sorted(report["metrics"]) == ["mae", "rmse"]
        assert report["provenance"]["seed"] == 5


@pytest.mark.integration
class TestOtherCommands:
    """Test cases for `split`, `report` and `scenario`"""

    def test_split_writes_assignment(self, tmp_path):
        """Test an index,fold file for ten rows in five folds"""
        target = tmp_path / "split.csv"
        assert main(["split", "--n", "10", "--validation", "kfold(5)", "--seed", "3", "--out", str(target)]) == 0
        frame = pd.read_csv(target)
        assert list(frame.columns) == ["index", "fold"]
        assert frame["index"].tolist() == list(range(10))
        assert sorted(frame["fold"].value_counts().tolist()) == [2, 2, 2, 2, 2]

    def test_split_stratified_from_file(self, tmp_path, write_csv):
        """Test a stratified split read from a label file"""
        rows = "".join(["a,a\n"] * 18 + ["b,b\n"] * 2)
        path = write_csv("y_true,y_pred\n" + rows)
        target = tmp_path / "strat.csv"
        assert main(["split", "--input", path, "--validation", "stratified_kfold(2)", "--out", str(target)]) == 0
        frame = pd.read_csv(target)
        assert frame["fold"].value_counts().tolist() == [10, 10]

    def test_split_needs_a_source(self, tmp_path):
        """Test usage errors of split"""
        assert main(["split", "--out", str(tmp_path / "x.csv")]) == 1
        assert main(["split", "--n", "10", "--validation", "none", "--out", str(tmp_path / "x.csv")]) == 1

    def test_report_re_renders(self, tmp_path, write_csv, capsys):
        """Test that a saved report renders to stdout and to a directory"""
        path = write_csv(CLEAN_REGRESSION)
        out = tmp_path / "saved"
        assert main(["evaluate", "--input", path, "--task", "regression", "--validation", "kfold(2)",
                     "--out", str(out)]) == 0
        capsys.readouterr()

        assert main(["report", str(out / "report.json")]) == 0
        assert "# Evaluation report: model" in capsys.readouterr().out

        assert main(["report", str(out / "report.json"), "--format", "markdown", "--out", str(tmp_path / "md")]) == 0
        assert (tmp_path / "md" / "report.md").exists()
        assert main(["report", str(tmp_path / "missing.json")]) == 2

    def test_scenario_command(self, tmp_path):
        """Test a small calibration scenario run"""
        out = tmp_path / "scenario"
        code = main(["scenario", "calibration", "--n", "2000", "--seed", "2", "--format", "json",
                     "--format", "markdown", "--out", str(out)])
        assert code == 0
        payload = read_json(out / "calibration.json")
        assert payload["seed"] == 2
        assert (out / "calibration.md").exists()
        assert main(["scenario", "calibration", "--n", "2000", "--param", "sharpness=2",
                     "--out", str(out)]) == 1
