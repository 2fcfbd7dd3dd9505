"""
Unit tests for settings, thresholds and run configuration
"""

import json
import os
import sys

import pytest

# Add parent directory to path to import metricsmith
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../')))

from metricsmith.cli.config import ValidationKind, ValidationPlan, build_run_config, load_run_config
from metricsmith.cli.runner import load_input
from metricsmith.config import DEFAULT_THRESHOLDS, Settings, load_settings, parse_seed
from metricsmith.core import TaskType
from metricsmith.errors import ConfigError, KOutOfRange, RatioOutOfRange
from metricsmith.regimes import RegimeKind


@pytest.mark.unit
class TestSettings:
    """Test cases for environment settings"""

    def test_seed_from_environment(self, monkeypatch, tmp_path):
        """Test that METRICSMITH_SEED is read and marked as such"""
        monkeypatch.setenv("METRICSMITH_SEED", "42")
        monkeypatch.setenv("METRICSMITH_WORKERS", "3")
        settings = load_settings(str(tmp_path / "absent.env"))
        assert settings.seed == 42
        assert settings.seed_from_env
        assert settings.workers == 3

    def test_defaults(self, tmp_path):
        """Test the defaults when nothing is set"""
        settings = load_settings(str(tmp_path / "absent.env"))
        assert settings.seed == 0
        assert not settings.seed_from_env
        assert settings.log_level == "INFO"
        assert settings.event_log_path is None

    def test_env_file(self, tmp_path):
        """Test that a .env file supplies unset variables"""
        env_file = tmp_path / "metricsmith.env"
        env_file.write_text("METRICSMITH_SEED=17\nMETRICSMITH_LOG_LEVEL=debug\n", encoding="utf-8")
        try:
            settings = load_settings(str(env_file))
        finally:
            os.environ.pop("METRICSMITH_SEED", None)
            os.environ.pop("METRICSMITH_LOG_LEVEL", None)
        assert settings.seed == 17
        assert settings.log_level == "DEBUG"

    @pytest.mark.parametrize("workers", ["many", "0"])
    def test_invalid_workers(self, monkeypatch, tmp_path, workers):
        """Test rejection of non-integer and non-positive worker counts"""
        monkeypatch.setenv("METRICSMITH_WORKERS", workers)
        with pytest.raises(ConfigError):
            load_settings(str(tmp_path / "absent.env"))

    def test_parse_seed_bounds(self):
        """Test the 64-bit seed range"""
        assert parse_seed("0") == 0
        assert parse_seed(2 ** 64 - 1) == 2 ** 64 - 1
        for bad in (-1, 2 ** 64, "seven", None):
            with pytest.raises(ConfigError):
                parse_seed(bad)


@pytest.mark.unit
class TestThresholds:
    """Test cases for diagnostic threshold overrides"""

    def test_override(self):
        """Test that overrides replace only the named keys"""
        changed = DEFAULT_THRESHOLDS.with_overrides({"lift": 0.1, "calibration_min_bin_count": 5})
        assert changed.lift == 0.1
        assert changed.calibration_min_bin_count == 5
        assert changed.mcc_gate == DEFAULT_THRESHOLDS.mcc_gate
        assert DEFAULT_THRESHOLDS.with_overrides(None) is DEFAULT_THRESHOLDS

    @pytest.mark.parametrize("overrides", [{"fudge": 1.0}, {"lift": "high"}, {"lift": -0.1}])
    def test_invalid_overrides(self, overrides):
        """Test unknown keys, non-numeric and negative values"""
        with pytest.raises(ConfigError):
            DEFAULT_THRESHOLDS.with_overrides(overrides)


@pytest.mark.unit
class TestValidationPlan:
    """Test cases for validation plan parsing"""

    @pytest.mark.parametrize("text, kind, k, ratio", [
        ("stratified_kfold(5)", ValidationKind.STRATIFIED_KFOLD, 5, 0.2),
        ("kfold:10", ValidationKind.KFOLD, 10, 0.2),
        ("holdout(0.3)", ValidationKind.HOLDOUT, 5, 0.3),
        ("none", ValidationKind.NONE, 5, 0.2),
        ("kfold", ValidationKind.KFOLD, 5, 0.2),
    ])
    def test_parse_text(self, text, kind, k, ratio):
        """Test the accepted text forms"""
        plan = ValidationPlan.parse(text)
        assert plan.kind == kind
        assert plan.k == k
        assert plan.ratio == pytest.approx(ratio)

    def test_parse_mapping(self):
        """Test the JSON object form"""
        plan = ValidationPlan.parse({"kind": "holdout", "ratio": 0.25})
        assert plan.to_dict() == {"kind": "holdout", "ratio": 0.25}

    def test_invalid(self):
        """Test unknown kinds and out-of-range arguments"""
        with pytest.raises(ConfigError):
            ValidationPlan.parse("bootstrap(100)")
        with pytest.raises(ConfigError):
            ValidationPlan.parse("kfold(2.5)")
        with pytest.raises(KOutOfRange):
            ValidationPlan.parse("kfold(1)")
        with pytest.raises(RatioOutOfRange):
            ValidationPlan.parse("holdout(1.5)")


@pytest.mark.unit
class TestRunConfig:
    """Test cases for merging config documents with overrides"""

    def test_seed_precedence(self):
        """Test command line over document over environment"""
        settings = Settings(seed=3, seed_from_env=True)
        payload = {"task": "regression", "input": "p.csv", "seed": 9}
        assert build_run_config({"task": "regression", "input": "p.csv"}, settings).seed == 3
        assert build_run_config(payload, settings).seed == 9
        assert build_run_config(payload, settings, {"seed": "12"}).seed == 12
        assert build_run_config({"task": "regression", "input": "p.csv"}).seed == 0

    def test_threshold_merge(self):
        """Test that threshold overrides merge key by key with the document"""
        payload = {"task": "regression", "input": "p.csv", "thresholds": {"lift": 0.2, "mcc_gate": 0.4}}
        config = build_run_config(payload, overrides={"thresholds": {"mcc_gate": 0.5}})
        assert config.thresholds.lift == 0.2
        assert config.thresholds.mcc_gate == 0.5

    def test_defaults_per_task(self):
        """Test default validation and outputs"""
        classification = build_run_config({"task": "classification", "input": "p.csv"})
        regression = build_run_config({"task": "regression", "input": "p.csv"})
        assert classification.validation.kind == ValidationKind.STRATIFIED_KFOLD
        assert regression.validation.kind == ValidationKind.KFOLD
        assert regression.outputs == ("json",)
        assert not regression.permissive

    def test_declared_classes(self, write_csv):
        """Test that declared classes keep their order and survive absence from the file"""
        path = write_csv("y_true,y_pred\nb,b\nb,a\n")
        config = build_run_config({"task": "classification", "input": path, "classes": ["b", "a", "c"]})
        assert config.classes == ("b", "a", "c")
        loaded = load_input(config)
        assert loaded.data.labels.classes == ("b", "a", "c")
        assert build_run_config({"task": "classification", "input": path}).classes is None

    def test_regime_task_inference(self):
        """Test that a regime fixes the task and takes the run seed"""
        config = build_run_config({"input": {"regime": {"kind": "heavy_tail_regression", "n": 500}}, "seed": 4})
        assert config.task == TaskType.REGRESSION
        assert config.regime.kind == RegimeKind.HEAVY_TAIL_REGRESSION
        assert config.regime.seed == 4
        assert config.source == "regime:heavy_tail_regression"
        with pytest.raises(ConfigError):
            build_run_config({"task": "classification", "input": {"regime": {"kind": "structured_residuals"}}})

    @pytest.mark.parametrize("payload", [
        {"input": "p.csv"},
        {"task": "ranking", "input": "p.csv"},
        {"task": "regression"},
        {"task": "regression", "input": {"path": "p.csv", "regime": {"kind": "miscalibrated"}}},
        {"task": "regression", "input": "p.csv", "validation": "stratified_kfold(5)"},
        {"task": "regression", "input": "p.csv", "metrics": ["accuracy"]},
        {"task": "regression", "input": "p.csv", "outputs": ["pdf"]},
        {"task": "regression", "input": "p.csv", "bins": 1},
        {"task": "classification", "input": "p.csv", "classes": "a,b"},
    ])
    def test_invalid_documents(self, payload):
        """Test rejection of incomplete or inconsistent documents"""
        with pytest.raises(ConfigError):
            build_run_config(payload)

    def test_load_resolves_relative_input(self, tmp_path):
        """Test that a relative input path resolves against the config file"""
        config_path = tmp_path / "runs" / "run.json"
        config_path.parent.mkdir()
        config_path.write_text(json.dumps({"task": "regression", "input": "data/p.csv"}), encoding="utf-8")
        config = load_run_config(str(config_path))
        assert config.input_path == str(tmp_path / "runs" / "data" / "p.csv")

    def test_load_rejects_bad_files(self, tmp_path):
        """Test missing files, invalid JSON and non-object documents"""
        broken = tmp_path / "broken.json"
        broken.write_text("{not json", encoding="utf-8")
        listing = tmp_path / "list.json"
        listing.write_text("[1, 2]", encoding="utf-8")
        for path in (tmp_path / "absent.json", broken, listing):
            with pytest.raises(ConfigError):
                load_run_config(str(path))
