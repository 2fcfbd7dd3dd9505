"""
Evaluation runner
Turns a RunConfig into a diagnosed EvaluationReport and its emitted files
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from ..core import ClassificationData, EvaluationReport, FoldAssignment, LabelSpace, Protocol, RegressionData
from ..diagnose import calibration_audit, imbalance_profile, run_diagnostics
from ..errors import ConfigError, MetricInfeasible, TooFewSamples
from ..event_log import get_event_logger
from ..flags import FlagCode
from ..regimes import generate
from ..regress import residual_table
from ..suite import PredictionSet, default_suite
from ..validate import cross_validate, evaluate_assignment, holdout_split, kfold, stratified_kfold
from .config import RunConfig, ValidationKind, ValidationPlan
from .emit import emit_report
from .ingest import LoadedPredictions, load_predictions

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    report: EvaluationReport
    data: PredictionSet
    artifacts: List[Path] = field(default_factory=list)


def load_input(config: RunConfig) -> LoadedPredictions:
    if config.regime is not None:
        return LoadedPredictions(generate(config.regime))
    labels = LabelSpace(config.classes, config.positive_class) if config.classes else None
    return load_predictions(config.input_path, config.task, config.positive_class, labels)


def split_assignment(plan: ValidationPlan, n: int, seed: int, labels: Optional[Sequence[Any]] = None) -> FoldAssignment:
    """Fold assignment for n rows; labels stratify hold-out splits and are required for stratified k-fold"""
    if plan.kind == ValidationKind.HOLDOUT:
        return holdout_split(n, plan.ratio, seed, stratify_labels=labels)
    if plan.kind == ValidationKind.KFOLD:
        return kfold(n, plan.k, seed)
    if plan.kind == ValidationKind.STRATIFIED_KFOLD:
        if labels is None:
            raise ConfigError("Stratified folds need class labels")
        return stratified_kfold(labels, plan.k, seed)
    raise ConfigError(f"Validation '{plan.kind.value}' does not produce a fold assignment")


def plan_assignment(data: PredictionSet, plan: ValidationPlan, seed: int) -> FoldAssignment:
    """Fold assignment for a validation plan (not used for pre-split input)"""
    if plan.kind == ValidationKind.STRATIFIED_KFOLD and not isinstance(data, ClassificationData):
        raise ConfigError("Stratified folds are available for classification only")
    labels = data.y_true if isinstance(data, ClassificationData) else None
    return split_assignment(plan, len(data), seed, labels)


def _details(data: PredictionSet, bins: int) -> Dict[str, Any]:
    details: Dict[str, Any] = {}
    if isinstance(data, ClassificationData):
        try:
            details["imbalance"] = imbalance_profile(data.y_true).to_dict()
        except MetricInfeasible as e:
            logger.debug(f"Imbalance profile skipped: {e}")
        if data.y_score is not None:
            details["calibration"] = calibration_audit(data, bins).to_dict()
    elif isinstance(data, RegressionData):
        try:
            details["residuals"] = residual_table(data, bins).to_dict()
        except TooFewSamples as e:
            logger.debug(f"Residual table skipped: {e}")
    return details


def evaluate(config: RunConfig, loaded: LoadedPredictions) -> EvaluationReport:
    """Apply the validation plan and metric suite, then attach diagnostics"""
    data = loaded.data
    if isinstance(data, ClassificationData):
        fallback = default_suite(config.task, data.labels.is_binary, data.y_score is not None)
    else:
        fallback = default_suite(config.task)
    suite = list(config.metrics) or fallback

    if config.validation.kind == ValidationKind.NONE:
        folds = loaded.fold_sets()
        report = cross_validate(
            folds,
            suite,
            seed=config.seed,
            protocol=Protocol.NONE,
            model_id=config.model_id,
            source=config.source,
            workers=config.workers,
            source_data=data,
            permissive=config.permissive,
        )
    else:
        if loaded.folds is not None:
            logger.warning(f"Ignoring the fold column: validation is {config.validation.kind.value}")
        assignment = plan_assignment(data, config.validation, config.seed)
        report = evaluate_assignment(
            data,
            assignment,
            suite,
            model_id=config.model_id,
            source=config.source,
            workers=config.workers,
            permissive=config.permissive,
        )

    flags = run_diagnostics(report, data, config.thresholds, config.bins)
    events = get_event_logger()
    for flag in report.flags + tuple(flags):
        events.log_flag(config.model_id, flag)
    return report.with_flags(flags).with_details(**_details(data, config.bins))


def run(config: RunConfig) -> RunResult:
    """
    Execute one evaluation run end to end

    Returns:
        RunResult with the diagnosed report, the evaluated data and the written files

    Raises:
        ConfigError, DataError, MetricInfeasible (unless permissive), OutputError
    """
    loaded = load_input(config)
    report = evaluate(config, loaded)
    artifacts = emit_report(report, config.outputs, config.out_dir, data=loaded.data, bins=config.bins)
    logger.info(
        f"Evaluated '{config.model_id}' from {config.source}: "
        f"{len(report.metrics)} metric(s), {len(report.flags)} flag(s)"
    )
    return RunResult(report=report, data=loaded.data, artifacts=artifacts)


def infeasible_metrics(report: EvaluationReport) -> Optional[List[str]]:
    """Messages of MetricInfeasible flags recorded in permissive mode"""
    messages = [f.message for f in report.flags if f.code == FlagCode.METRIC_INFEASIBLE]
    return messages or None
