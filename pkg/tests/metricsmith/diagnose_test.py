"""
Unit tests for diagnostics
Tests imbalance detection, the accuracy trap, ranking disagreement, calibration and MAPE checks
"""

import unittest
import sys
import os

import numpy as np
from scipy.stats import kendalltau

# Add parent directory to path to import metricsmith
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../')))

from metricsmith.classify import build_confusion
from metricsmith.config import DEFAULT_THRESHOLDS
from metricsmith.core import (
    ClassificationData,
    Direction,
    EvaluationReport,
    LabelSpace,
    Protocol,
    Provenance,
    RegressionData,
    TaskType,
    aggregate_folds,
)
from metricsmith.diagnose import (
    accuracy_trap_check,
    calibration_audit,
    count_inversions,
    degeneracy_flags,
    imbalance_profile,
    macro_micro_gap,
    mape_stability_check,
    ranking_comparison,
    reliability_table,
    run_diagnostics,
    severe_imbalance_check,
)
from metricsmith.errors import (
    MissingAccuracy,
    MissingMetric,
    MissingScores,
    ParameterOutOfRange,
    SingleClassInput,
)
from metricsmith.flags import FlagCode, Severity
from metricsmith.regimes import gen_multiclass
from metricsmith.validate import cross_validate

BINARY = LabelSpace(("0", "1"))


def imbalanced(positives_found, positives=5, negatives=95):
    """95/5 data; every negative is right and `positives_found` positives are caught"""
    truth = ["0"] * negatives + ["1"] * positives
    pred = ["0"] * negatives + ["1"] * positives_found + ["0"] * (positives - positives_found)
    return ClassificationData(BINARY, truth, pred)


def model_report(model_id, **means):
    """Single-fold report carrying the given metric means"""
    metrics = {name: aggregate_folds([value], name) for name, value in means.items()}
    provenance = Provenance(seed=0, k=1, protocol=Protocol.NONE, n_rows=100)
    return EvaluationReport(TaskType.CLASSIFICATION, metrics, (), provenance, model_id)


class TestImbalance(unittest.TestCase):
    """Test cases for imbalance_profile and SevereImbalance"""

    def test_profile(self):
        """Test the 95/5 profile"""
        profile = imbalance_profile(["0"] * 95 + ["1"] * 5)
        self.assertAlmostEqual(profile.imbalance_ratio, 19.0, places=12)
        self.assertAlmostEqual(profile.majority_baseline_accuracy, 0.95, places=12)
        self.assertEqual((profile.majority_class, profile.minority_class), ("0", "1"))
        flag = severe_imbalance_check(profile)
        self.assertEqual(flag.code, FlagCode.SEVERE_IMBALANCE)
        self.assertEqual(flag.evidence["imbalance_ratio"], 19.0)

    def test_balanced_is_quiet(self):
        """Test that a 60/40 split is not flagged"""
        self.assertIsNone(severe_imbalance_check(imbalance_profile(["a"] * 60 + ["b"] * 40)))

    def test_single_class(self):
        """Test that one present class cannot be profiled"""
        with self.assertRaises(SingleClassInput):
            imbalance_profile(["a", "a"])


class TestAccuracyTrap(unittest.TestCase):
    """Test cases for the accuracy-trap gate"""

    def check(self, data, metrics):
        report = cross_validate([data], metrics)
        return accuracy_trap_check(report, imbalance_profile(data.y_true))

    def test_majority_predictor_is_trapped(self):
        """Test that predicting the majority class raises a critical AccuracyTrap"""
        flag = self.check(imbalanced(0), ["accuracy", "mcc"])
        self.assertEqual(flag.code, FlagCode.ACCURACY_TRAP)
        self.assertEqual(flag.severity, Severity.CRITICAL)
        self.assertAlmostEqual(flag.evidence["lift"], 0.0, places=12)
        self.assertEqual(flag.evidence["mcc"], 0.0)

    def test_threshold_grid(self):
        """Test both parts of the gate across lift and minority-recall cases"""
        # lift 0.05 reaches the threshold
        self.assertIsNone(self.check(imbalanced(5), ["accuracy", "mcc", "recall"]))
        # small lift but MCC 0.77 and recall 0.6 are healthy
        self.assertIsNone(self.check(imbalanced(3), ["accuracy", "mcc", "recall"]))
        # small lift and recall 0.4 below the gate
        flag = self.check(imbalanced(2), ["accuracy", "mcc", "recall"])
        self.assertEqual(flag.code, FlagCode.ACCURACY_TRAP)
        self.assertAlmostEqual(flag.evidence["minority_recall"], 0.4, places=12)
        # no MCC and no minority recall: nothing to gate on
        self.assertIsNone(self.check(imbalanced(0), ["accuracy"]))

    def test_missing_accuracy(self):
        """Test that the gate needs accuracy in the report"""
        data = imbalanced(0)
        with self.assertRaises(MissingAccuracy):
            accuracy_trap_check(cross_validate([data], ["mcc"]), imbalance_profile(data.y_true))

    def test_run_diagnostics_order(self):
        """Test that SevereImbalance precedes AccuracyTrap"""
        data = imbalanced(0)
        report = cross_validate([data], ["accuracy", "mcc"])
        codes = [flag.code for flag in run_diagnostics(report, data)]
        self.assertEqual(codes[:2], [FlagCode.SEVERE_IMBALANCE, FlagCode.ACCURACY_TRAP])
        # single-fold and undefined-MCC warnings follow as info flags
        self.assertIn(FlagCode.SINGLE_FOLD, codes)
        self.assertIn(FlagCode.MCC_UNDEFINED, codes)


class TestRankingComparison(unittest.TestCase):
    """Test cases for ranking disagreement"""

    def test_identical_orders(self):
        """Test tau 1 when both metrics agree"""
        models = {
            "a": model_report("a", accuracy=0.9, f1=0.85),
            "b": model_report("b", accuracy=0.8, f1=0.75),
            "c": model_report("c", accuracy=0.7, f1=0.65),
        }
        result = ranking_comparison(models, "accuracy", "f1", Direction.HIGHER_BETTER, Direction.HIGHER_BETTER)
        self.assertEqual((result.kendall_tau, result.inversions), (1.0, 0))
        self.assertEqual(result.model_order_a, ("a", "b", "c"))
        self.assertEqual(result.flags, ())

    def test_reversed_orders(self):
        """Test tau -1 and three inversions when log loss reverses accuracy"""
        models = {
            "a": model_report("a", accuracy=0.9, log_loss=0.3),
            "b": model_report("b", accuracy=0.8, log_loss=0.2),
            "c": model_report("c", accuracy=0.7, log_loss=0.1),
        }
        result = ranking_comparison(models, "accuracy", "log_loss", "higher_better", "lower_better")
        self.assertEqual((result.kendall_tau, result.inversions), (-1.0, 3))
        self.assertEqual(result.model_order_b, ("c", "b", "a"))
        self.assertEqual([f.code for f in result.flags], [FlagCode.CALIBRATION_INVERSION])

    def test_calibration_inversion_pair(self):
        """Test the two-model case: more accurate but worse calibrated"""
        models = {
            "A": model_report("A", accuracy=0.85, log_loss=0.60),
            "B": model_report("B", accuracy=0.80, log_loss=0.35),
        }
        result = ranking_comparison(models, "accuracy", "log_loss", Direction.HIGHER_BETTER, Direction.LOWER_BETTER)
        self.assertEqual(result.inversions, 1)
        self.assertEqual(result.kendall_tau, -1.0)
        self.assertEqual(result.flags[0].evidence["inversions"], 1.0)

    def test_antisymmetry(self):
        """Test that swapping the metrics keeps the inversion count"""
        rng = np.random.default_rng(17)
        models = {f"m{i}": model_report(f"m{i}", accuracy=float(a), f1=float(b))
                  for i, (a, b) in enumerate(rng.random((6, 2)))}
        ab = ranking_comparison(models, "accuracy", "f1", Direction.HIGHER_BETTER, Direction.HIGHER_BETTER)
        ba = ranking_comparison(models, "f1", "accuracy", Direction.HIGHER_BETTER, Direction.HIGHER_BETTER)
        self.assertEqual(ab.inversions, ba.inversions)
        self.assertAlmostEqual(ab.kendall_tau, ba.kendall_tau, places=12)

    def test_tau_matches_scipy(self):
        """Test tau against scipy's Kendall tau on tie-free scores"""
        rng = np.random.default_rng(23)
        scores = rng.random((8, 2))
        models = {f"m{i}": model_report(f"m{i}", accuracy=float(a), f1=float(b)) for i, (a, b) in enumerate(scores)}
        result = ranking_comparison(models, "accuracy", "f1", Direction.HIGHER_BETTER, Direction.HIGHER_BETTER)
        expected, _ = kendalltau(scores[:, 0], scores[:, 1])
        self.assertAlmostEqual(result.kendall_tau, float(expected), places=12)

    def test_ties_and_errors(self):
        """Test tie breaking by model id and invalid inputs"""
        models = {
            "b": model_report("b", accuracy=0.8, f1=0.7),
            "a": model_report("a", accuracy=0.8, f1=0.6),
        }
        result = ranking_comparison(models, "accuracy", "f1", Direction.HIGHER_BETTER, Direction.HIGHER_BETTER)
        self.assertEqual(result.model_order_a, ("a", "b"))
        self.assertIn(FlagCode.RANKING_TIE, [f.code for f in result.flags])
        with self.assertRaises(ParameterOutOfRange):
            ranking_comparison({"a": models["a"]}, "accuracy", "f1", "higher_better", "higher_better")
        with self.assertRaises(MissingMetric):
            ranking_comparison(models, "accuracy", "mcc", "higher_better", "higher_better")

    def test_tie_break_preference(self):
        """Test that a preferred model takes exact ties ahead of id order"""
        models = {
            "a": model_report("a", accuracy=0.8, log_loss=0.4),
            "b": model_report("b", accuracy=0.8, log_loss=0.6),
        }
        by_id = ranking_comparison(models, "accuracy", "log_loss", "higher_better", "lower_better")
        self.assertEqual(by_id.inversions, 0)
        preferred = ranking_comparison(
            models, "accuracy", "log_loss", "higher_better", "lower_better", tie_break=("b", "a")
        )
        self.assertEqual(preferred.model_order_a, ("b", "a"))
        self.assertEqual(preferred.model_order_b, ("a", "b"))
        self.assertEqual(preferred.inversions, 1)
        self.assertIn(FlagCode.CALIBRATION_INVERSION, [f.code for f in preferred.flags])

    def test_count_inversions(self):
        """Test the discordant pair counter"""
        self.assertEqual(count_inversions([0, 1, 2, 3]), 0)
        self.assertEqual(count_inversions([2, 1, 0]), 3)
        self.assertEqual(count_inversions([1, 0, 3, 2]), 2)


class TestMacroMicroGap(unittest.TestCase):
    """Test cases for the macro/micro divergence check"""

    def test_skewed_channel_flags(self):
        """Test that a skewed three-class channel shows a large gap"""
        data = gen_multiclass(20000, [0.9, 0.05, 0.05],
                              [[0.95, 0.025, 0.025], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]], seed=1)
        flag = macro_micro_gap(build_confusion(data))
        self.assertEqual(flag.code, FlagCode.MACRO_MICRO_GAP)
        self.assertGreater(flag.evidence["gap"], 0.2)
        self.assertIn("f_1", flag.evidence)

    def test_perfect_predictions_are_quiet(self):
        """Test that identical micro and macro F raise nothing"""
        labels = list("abcabc")
        cm = build_confusion(ClassificationData(LabelSpace(("a", "b", "c")), labels, labels))
        self.assertIsNone(macro_micro_gap(cm))


class TestMapeStability(unittest.TestCase):
    """Test cases for the near-zero target check"""

    def test_zero_share(self):
        """Test that 10% zero targets flag MapeUnstable"""
        y = np.r_[np.zeros(10), np.linspace(5.0, 50.0, 90)]
        flag = mape_stability_check(RegressionData(y, y + 1.0))
        self.assertEqual((flag.code, flag.severity), (FlagCode.MAPE_UNSTABLE, Severity.WARN))
        self.assertAlmostEqual(flag.evidence["near_zero_fraction"], 0.1, places=12)

    def test_all_zero_is_critical(self):
        """Test that an all-zero target set is critical"""
        flag = mape_stability_check(RegressionData(np.zeros(5), np.ones(5)))
        self.assertEqual(flag.severity, Severity.CRITICAL)

    def test_healthy_targets(self):
        """Test that targets away from zero are not flagged"""
        y = np.linspace(10.0, 20.0, 50)
        self.assertIsNone(mape_stability_check(RegressionData(y, y), DEFAULT_THRESHOLDS))

    def test_epsilon_scale_override(self):
        """Test that a wider epsilon scale catches small but nonzero targets"""
        y = np.r_[np.full(10, 0.5), np.linspace(5.0, 50.0, 90)]
        data = RegressionData(y, y + 1.0)
        self.assertIsNone(mape_stability_check(data))
        flag = mape_stability_check(data, epsilon_scale=0.05)
        self.assertEqual(flag.code, FlagCode.MAPE_UNSTABLE)
        self.assertAlmostEqual(flag.evidence["near_zero_fraction"], 0.1, places=12)
        self.assertEqual(flag.evidence["epsilon_scale"], 0.05)
        with self.assertRaises(ParameterOutOfRange):
            mape_stability_check(data, epsilon_scale=-0.1)


class TestCalibration(unittest.TestCase):
    """Test cases for calibration_audit and reliability_table"""

    def test_bin_merging(self):
        """Test that a sparse bin joins its neighbour"""
        truth = ["1"] * 10 + ["1"] * 5 + ["1"] * 10
        p = np.r_[np.full(10, 0.95), np.full(5, 0.75), np.full(10, 0.55)]
        data = ClassificationData(BINARY, truth, y_score=np.column_stack([1 - p, p]))
        audit = calibration_audit(data, bins=10, min_bin_count=10)
        self.assertEqual([b.count for b in audit.bins], [10, 15])
        self.assertEqual((audit.bins[1].lower, audit.bins[1].upper), (0.7, 1.0))
        self.assertIn(FlagCode.CALIBRATION_BINS_MERGED.value, audit.warnings)

    def test_calibrated_bin(self):
        """Test that confidence equal to accuracy gives no gap"""
        p = np.full(10, 0.8)
        data = ClassificationData(BINARY, ["1"] * 8 + ["0"] * 2, y_score=np.column_stack([1 - p, p]))
        audit = calibration_audit(data, bins=10, min_bin_count=10)
        self.assertAlmostEqual(audit.expected_gap, 0.0, places=12)
        self.assertEqual(audit.warnings, ())
        self.assertEqual(len(audit.to_dict()["bins"]), 1)

    def test_calibrated_population(self):
        """Test that labels drawn at their stated probabilities give a small gap in every bin"""
        rng = np.random.default_rng(31)
        p = rng.random(100000)
        truth = np.where(rng.random(100000) < p, "1", "0")
        data = ClassificationData(BINARY, truth, y_score=np.column_stack([1 - p, p]))
        audit = calibration_audit(data, bins=10)
        self.assertEqual(len(audit.bins), 5)
        for b in audit.bins:
            self.assertLess(abs(b.gap), 0.02, msg=f"bin [{b.lower}, {b.upper})")
        self.assertLess(audit.expected_gap, 0.01)

    def test_overconfidence_sign(self):
        """Test that confident mistakes give positive overconfidence"""
        p = np.full(20, 0.9)
        data = ClassificationData(BINARY, ["1"] * 10 + ["0"] * 10, y_score=np.column_stack([1 - p, p]))
        audit = calibration_audit(data)
        self.assertAlmostEqual(audit.overconfidence, 0.4, places=12)
        with self.assertRaises(MissingScores):
            calibration_audit(ClassificationData(BINARY, ["1"], ["1"]))

    def test_reliability_table(self):
        """Test plot rows over the positive-class probability"""
        rows = reliability_table(["1", "0", "1", "1"], [0.05, 0.15, 0.95, 1.0], "1", bins=10)
        self.assertEqual([(r.lower, r.count) for r in rows], [(0.0, 1), (0.1, 1), (0.9, 2)])
        self.assertEqual(rows[2].positive_rate, 1.0)


class TestDegeneracy(unittest.TestCase):
    """Test cases for degeneracy_flags"""

    def test_metric_warnings_become_info(self):
        """Test that per-metric warnings surface once per code"""
        report = cross_validate([imbalanced(0)], ["accuracy", "mcc"])
        flags = degeneracy_flags(report)
        codes = [f.code for f in flags]
        self.assertEqual(codes, sorted(codes, key=lambda c: c.value))
        self.assertTrue(all(f.severity == Severity.INFO for f in flags))
        single = next(f for f in flags if f.code == FlagCode.SINGLE_FOLD)
        self.assertEqual(single.evidence["metrics"], 2.0)


if __name__ == '__main__':
    unittest.main()
