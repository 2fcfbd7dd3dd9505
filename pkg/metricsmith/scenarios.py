"""
Scenario Catalogue
Seven end-to-end metric-disagreement scenarios built from synthetic regimes
"""

import math
import inspect
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from . import regimes
from .classify import AveragingMode, averaged_f_beta, build_confusion
from .config import DEFAULT_THRESHOLDS, DiagnosticThresholds
from .core import ClassificationData, EvaluationReport, FoldAssignment, RegressionData
from .diagnose import RankingComparison, calibration_audit, ranking_comparison, run_diagnostics
from .errors import ConfigError, ParameterOutOfRange
from .flags import DiagnosticFlag
from .rank import MaxFBeta, MinRecall, binarize, tune_threshold
from .regress import mae, mape, residual_table, rmse_mae_ratio
from .suite import direction_of
from .validate import DEFAULT_K, cross_validate, evaluate_assignment, holdout_split, plan_folds

logger = logging.getLogger(__name__)

PredictionSet = Union[ClassificationData, RegressionData]


@dataclass
class ScenarioReport:
    """Per-model reports, cross-model rankings and oracle values for one scenario run"""
    name: str
    description: str
    seed: int
    n: int
    models: Dict[str, EvaluationReport] = field(default_factory=dict)
    comparisons: List[RankingComparison] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    datasets: Dict[str, PredictionSet] = field(default_factory=dict)

    @property
    def flags(self) -> List[DiagnosticFlag]:
        return [flag for comparison in self.comparisons for flag in comparison.flags]

    def flag_codes(self) -> List[str]:
        codes = [flag.code.value for flag in self.flags]
        for report in self.models.values():
            codes.extend(report.flag_codes())
        return codes

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.name,
            "description": self.description,
            "seed": self.seed,
            "n": self.n,
            "models": {model_id: report.to_dict() for model_id, report in self.models.items()},
            "comparisons": [c.to_dict() for c in self.comparisons],
            "flags": [flag.to_dict() for flag in self.flags],
            "details": self.details,
        }


class _Context(NamedTuple):
    seed: int
    n: int
    k: int
    thresholds: DiagnosticThresholds


def _diagnosed(report: EvaluationReport, data: PredictionSet, ctx: _Context) -> EvaluationReport:
    return report.with_flags(run_diagnostics(report, data, ctx.thresholds))


def _evaluate(scenario: ScenarioReport, model_id: str, data: PredictionSet, suite: Sequence[str],
              ctx: _Context, assignment: Optional[FoldAssignment] = None) -> EvaluationReport:
    assignment = assignment if assignment is not None else plan_folds(data, ctx.k, ctx.seed)
    report = evaluate_assignment(data, assignment, suite, model_id=model_id, source=f"scenario:{scenario.name}")
    report = _diagnosed(report, data, ctx)
    scenario.models[model_id] = report
    scenario.datasets[model_id] = data
    return report


def _evaluate_baseline(scenario: ScenarioReport, model_id: str, kind: regimes.BaselineKind, data: PredictionSet,
                       suite: Sequence[str], ctx: _Context) -> EvaluationReport:
    """Fit the baseline on each training part and score it on the matching test fold"""
    assignment = plan_folds(data, ctx.k, ctx.seed)
    folds = [
        regimes.baseline_predict(kind, data.subset(train), data.subset(test), ctx.seed + fold)
        for fold, (train, test) in enumerate(assignment.splits())
    ]
    report = cross_validate(
        folds, suite,
        seed=ctx.seed, protocol=assignment.protocol, k=assignment.k,
        model_id=model_id, source=f"scenario:{scenario.name}:{kind.value}",
        fold_warnings=assignment.warnings, source_data=data,
    )
    report = _diagnosed(report, data, ctx)
    scenario.models[model_id] = report
    return report


def _compare(
    scenario: ScenarioReport, metric_a: str, metric_b: str, tie_break: Sequence[str] = ()
) -> RankingComparison:
    comparison = ranking_comparison(
        scenario.models, metric_a, metric_b, direction_of(metric_a), direction_of(metric_b), tie_break
    )
    scenario.comparisons.append(comparison)
    return comparison


def accuracy_trap(ctx: _Context, prevalence: float = 0.05, separation: float = 1.5) -> ScenarioReport:
    scenario = ScenarioReport(
        "accuracy_trap",
        "Rare positives: accuracy stays near the majority baseline while PR AUC and MCC expose the minority",
        ctx.seed, ctx.n,
    )
    data = regimes.gen_binary_scores(ctx.n, prevalence, separation, ctx.seed)
    suite = ["accuracy", "precision", "recall", "f1", "mcc", "roc_auc", "pr_auc", "log_loss"]
    _evaluate(scenario, "scored_model", data, suite, ctx)
    _evaluate_baseline(scenario, "majority_baseline", regimes.BaselineKind.MAJORITY_CLASS, data, suite, ctx)
    _compare(scenario, "accuracy", "mcc")
    _compare(scenario, "accuracy", "pr_auc")
    scenario.details = {
        "prevalence": prevalence,
        "separation": separation,
        "expected_roc_auc": regimes.expected_auc(separation),
    }
    return scenario


def asymmetric_cost(ctx: _Context, prevalence: float = 0.1, separation: float = 2.0,
                    recall_target: float = 0.9) -> ScenarioReport:
    """Thresholds tuned on one half of the data, evaluated on the other half"""
    scenario = ScenarioReport(
        "asymmetric_cost",
        "Costly misses: F2 and recall-floor thresholds trade precision for recall against the 0.5 default",
        ctx.seed, ctx.n,
    )
    data = regimes.gen_binary_scores(ctx.n, prevalence, separation, ctx.seed)
    split = holdout_split(len(data), 0.5, ctx.seed, data.y_true)
    tuning = data.subset(split.train_indices(1))
    evaluation = data.subset(split.test_indices(1))
    positive = data.labels.positive
    negative = data.labels.classes[1 - data.labels.positive_index]

    objectives = {
        "max_f1": MaxFBeta(1.0),
        "max_f2": MaxFBeta(2.0),
        f"min_recall_{recall_target:g}": MinRecall(recall_target),
    }
    choices = {
        model_id: tune_threshold(tuning.y_true, tuning.positive_scores(), positive, objective)
        for model_id, objective in objectives.items()
    }
    thresholds = {"default_0.5": 0.5}
    thresholds.update({model_id: choice.threshold for model_id, choice in choices.items()})

    suite = ["accuracy", "precision", "recall", "f1", "f2", "mcc"]
    scores = evaluation.positive_scores()
    assignment = plan_folds(evaluation, ctx.k, ctx.seed)
    for model_id, threshold in thresholds.items():
        decided = ClassificationData(
            labels=evaluation.labels,
            y_true=evaluation.y_true,
            y_pred=np.where(binarize(scores, threshold), positive, negative),
            y_score=evaluation.y_score,
        )
        _evaluate(scenario, model_id, decided, suite, ctx, assignment)
    _compare(scenario, "f1", "f2")
    _compare(scenario, "precision", "recall")
    scenario.details = {
        "thresholds": thresholds,
        "operating_points": {model_id: choice.to_dict() for model_id, choice in choices.items()},
    }
    return scenario


SKEWED_CHANNEL = ((0.9, 0.05, 0.05), ((0.95, 0.025, 0.025), (0.25, 0.5, 0.25), (0.25, 0.25, 0.5)))
UNIFORM_CHANNEL = ((1 / 3, 1 / 3, 1 / 3), ((0.8, 0.1, 0.1), (0.1, 0.8, 0.1), (0.1, 0.1, 0.8)))


def averaging(ctx: _Context) -> ScenarioReport:
    scenario = ScenarioReport(
        "averaging",
        "Uneven classes: macro F1 falls below micro F1 (= accuracy) when minorities are weak",
        ctx.seed, ctx.n,
    )
    suite = ["accuracy", "micro_f1", "macro_f1", "minority_recall"]
    oracles = {}
    for model_id, (prevalences, confusion) in (("skewed", SKEWED_CHANNEL), ("uniform", UNIFORM_CHANNEL)):
        data = regimes.gen_multiclass(ctx.n, prevalences, confusion, ctx.seed)
        _evaluate(scenario, model_id, data, suite, ctx)
        analytic = regimes.analytic_multiclass_f(prevalences, confusion)
        cm = build_confusion(data)
        oracles[model_id] = {
            "analytic_micro_f1": analytic.micro,
            "analytic_macro_f1": analytic.macro,
            "pooled_micro_f1": averaged_f_beta(cm, 1.0, AveragingMode.MICRO).value,
            "pooled_macro_f1": averaged_f_beta(cm, 1.0, AveragingMode.MACRO).value,
        }
    _compare(scenario, "micro_f1", "macro_f1")
    scenario.details = {"oracles": oracles}
    return scenario


def calibration(ctx: _Context, prevalence: float = 0.5, separation: float = 1.0,
                temperature: float = 0.25) -> ScenarioReport:
    scenario = ScenarioReport(
        "calibration",
        "Overconfidence: temperature sharpening keeps accuracy fixed while log loss worsens",
        ctx.seed, ctx.n,
    )
    if temperature == 1.0:
        raise ParameterOutOfRange("A temperature of 1 leaves the scores unchanged; nothing to compare")
    calibrated = regimes.gen_binary_scores(ctx.n, prevalence, separation, ctx.seed)
    sharpened = regimes.apply_temperature(calibrated, temperature)
    suite = ["accuracy", "log_loss", "roc_auc", "calibration_gap"]
    assignment = plan_folds(calibrated, ctx.k, ctx.seed)
    reference, tempered = "temperature_1", f"temperature_{temperature:g}"
    audits = {}
    for model_id, data in ((reference, calibrated), (tempered, sharpened)):
        _evaluate(scenario, model_id, data, suite, ctx, assignment)
        audits[model_id] = calibration_audit(data).to_dict()
    # accuracy ties exactly under tempering; the tempered model takes the tie so log loss must overturn it
    tie_break = (tempered, reference)
    comparison = _compare(scenario, "accuracy", "log_loss", tie_break)
    scenario.details = {
        "temperature": temperature,
        "reference_model": reference,
        "accuracy_tied": scenario.models[reference].metric_mean("accuracy")
        == scenario.models[tempered].metric_mean("accuracy"),
        "tie_break": list(tie_break),
        "log_loss_order": list(comparison.model_order_b),
        "calibration_audits": audits,
    }
    return scenario


def outlier_penalty(ctx: _Context, outlier_fraction: float = 0.01, outlier_scale: float = 50.0) -> ScenarioReport:
    scenario = ScenarioReport(
        "outlier_penalty",
        "Rare extreme errors: RMSE grows far beyond MAE, which the Gaussian sqrt(pi/2) ratio anchors",
        ctx.seed, ctx.n,
    )
    suite = ["mae", "rmse", "r_squared"]
    ratios = {}
    for model_id, fraction in (("gaussian", 0.0), ("heavy_tail", outlier_fraction)):
        data = regimes.gen_heavy_tail_regression(ctx.n, fraction, outlier_scale, ctx.seed)
        _evaluate(scenario, model_id, data, suite, ctx)
        ratios[model_id] = rmse_mae_ratio(data)
    _compare(scenario, "mae", "rmse")
    scenario.details = {
        "rmse_mae_ratio": ratios,
        "gaussian_ratio": math.sqrt(math.pi / 2.0),
        "outlier_fraction": outlier_fraction,
        "outlier_scale": outlier_scale,
    }
    return scenario


def residual_structure(ctx: _Context, underprediction: float = 0.2, heteroscedasticity: float = 10.0,
                       noise: float = 0.1) -> ScenarioReport:
    scenario = ScenarioReport(
        "residual_structure",
        "High R^2 with systematic underprediction and growing spread, visible only in the residual table",
        ctx.seed, ctx.n,
    )
    suite = ["mae", "rmse", "r_squared"]
    tables = {}
    variants = (
        ("structured", underprediction, heteroscedasticity),
        ("unstructured", 0.0, 1.0),
    )
    for model_id, bias, spread in variants:
        data = regimes.gen_structured_residuals(ctx.n, bias, spread, noise, ctx.seed)
        _evaluate(scenario, model_id, data, suite, ctx)
        tables[model_id] = residual_table(data, 10).to_dict()
    _compare(scenario, "r_squared", "mae")
    scenario.details = {"residual_tables": tables}
    return scenario


def mape_baseline(
    ctx: _Context, low_rate: float = 0.1, high_rate: float = 20.0, low_mix: float = 0.3
) -> ScenarioReport:
    scenario = ScenarioReport(
        "mape_baseline",
        "Near-zero targets: MAPE explodes on small denominators while MAE stays stable",
        ctx.seed, ctx.n,
    )
    suite = ["mae", "rmse", "mape"]
    _evaluate(scenario, "low_baseline", regimes.gen_low_baseline_counts(ctx.n, low_rate, high_rate, low_mix, ctx.seed),
              suite, ctx)
    _evaluate(scenario, "high_baseline", regimes.gen_low_baseline_counts(ctx.n, low_rate, 100.0, 0.001, ctx.seed),
              suite, ctx)
    _compare(scenario, "mae", "mape")

    worked = RegressionData(np.array([0.1, 100.0]), np.array([1.1, 101.0]))
    scenario.details = {
        "expected_zero_fraction": low_mix * math.exp(-low_rate),
        "worked_example": {
            "y_true": worked.y_true.tolist(),
            "y_pred": worked.y_pred.tolist(),
            "mape_percent": mape(worked).value_percent,
            "mae": mae(worked),
        },
    }
    return scenario


ScenarioFn = Callable[..., ScenarioReport]

# name -> (builder, default sample count)
SCENARIOS: Dict[str, Tuple[ScenarioFn, int]] = {
    "accuracy_trap": (accuracy_trap, 20000),
    "asymmetric_cost": (asymmetric_cost, 20000),
    "averaging": (averaging, 50000),
    "calibration": (calibration, 10000),
    "outlier_penalty": (outlier_penalty, 100000),
    "residual_structure": (residual_structure, 10000),
    "mape_baseline": (mape_baseline, 20000),
}


def run_scenario(
    name: str,
    seed: int = 0,
    n: Optional[int] = None,
    thresholds: DiagnosticThresholds = DEFAULT_THRESHOLDS,
    k: int = DEFAULT_K,
    **parameters: Any,
) -> ScenarioReport:
    """
    Run one named scenario

    Args:
        name: One of SCENARIOS
        seed: Seed for every generator and split
        n: Sample count (scenario default when omitted)
        thresholds: Diagnostic thresholds
        k: Fold count
        **parameters: Regime parameters forwarded to the scenario builder

    Returns:
        ScenarioReport
    """
    try:
        builder, default_n = SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"Unknown scenario '{name}' (known: {', '.join(SCENARIOS)})") from None
    ctx = _Context(seed=seed, n=n if n is not None else default_n, k=k, thresholds=thresholds)
    logger.info(f"Running scenario '{name}' with n={ctx.n}, seed={seed}")
    try:
        inspect.signature(builder).bind(ctx, **parameters)
    except TypeError as e:
        raise ConfigError(f"Invalid parameters for scenario '{name}': {e}") from e
    return builder(ctx, **parameters)
