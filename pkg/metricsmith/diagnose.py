"""
Diagnostics
Regime detection and metric-disagreement analytics over reports and prediction sets
"""

import math
import logging
from bisect import bisect
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .classify import AveragingMode, ConfusionMatrix, averaged_f_beta, build_confusion, per_class_f_beta
from .config import DEFAULT_THRESHOLDS, DiagnosticThresholds
from .core import (
    ClassificationData,
    Direction,
    EvaluationReport,
    RegressionData,
    as_label_array,
    canonical_label,
    sort_labels,
)
from .errors import (
    LengthMismatch,
    MissingAccuracy,
    MissingMetric,
    MissingScores,
    NoUsableBins,
    ParameterOutOfRange,
    SingleClassInput,
    TooFewSamples,
)
from .flags import DiagnosticFlag, FlagCode, Severity, make_flag
from .regress import residual_flags, residual_table

logger = logging.getLogger(__name__)

# Report metrics consulted by the accuracy-trap gate, in order of preference
MINORITY_RECALL_METRICS = ("minority_recall", "recall")


@dataclass(frozen=True)
class ImbalanceProfile:
    prevalences: Dict[str, float]
    imbalance_ratio: float
    majority_baseline_accuracy: float
    majority_class: str
    minority_class: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "prevalences": dict(self.prevalences),
            "imbalance_ratio": self.imbalance_ratio,
            "majority_baseline_accuracy": self.majority_baseline_accuracy,
            "majority_class": self.majority_class,
            "minority_class": self.minority_class,
        }


def imbalance_profile(labels: Sequence[Any]) -> ImbalanceProfile:
    """Class prevalences, max/min prevalence ratio and the majority-class accuracy"""
    values = as_label_array(labels)
    classes = sort_labels(values.tolist())
    if len(classes) < 2:
        raise SingleClassInput(f"Imbalance profile needs at least 2 classes present, got {list(classes)}")
    counts = np.array([np.count_nonzero(values == c) for c in classes])
    shares = counts / counts.sum()
    # argmax/argmin return the first (lowest ordered) class on ties
    major, minor = int(np.argmax(counts)), int(np.argmin(counts))
    return ImbalanceProfile(
        prevalences={c: float(s) for c, s in zip(classes, shares)},
        imbalance_ratio=float(counts[major]) / float(counts[minor]),
        majority_baseline_accuracy=float(shares[major]),
        majority_class=classes[major],
        minority_class=classes[minor],
    )


def severe_imbalance_check(
    profile: ImbalanceProfile,
    thresholds: DiagnosticThresholds = DEFAULT_THRESHOLDS,
) -> Optional[DiagnosticFlag]:
    if profile.imbalance_ratio < thresholds.severe_imbalance_ratio:
        return None
    return make_flag(
        FlagCode.SEVERE_IMBALANCE, Severity.WARN,
        f"Class '{profile.majority_class}' outnumbers '{profile.minority_class}' "
        f"{profile.imbalance_ratio:.3g} to 1; accuracy alone is misleading",
        imbalance_ratio=profile.imbalance_ratio,
        threshold=thresholds.severe_imbalance_ratio,
        majority_baseline_accuracy=profile.majority_baseline_accuracy,
        minority_prevalence=profile.prevalences[profile.minority_class],
    )


def accuracy_trap_check(
    report: EvaluationReport,
    profile: ImbalanceProfile,
    thresholds: DiagnosticThresholds = DEFAULT_THRESHOLDS,
) -> Optional[DiagnosticFlag]:
    """
    AccuracyTrap (critical): accuracy barely beats the majority baseline while MCC or
    minority recall is poor

    Both parts must hold. Whichever of MCC and minority recall the report carries is
    checked; with neither present the check cannot fire.
    """
    accuracy = report.metric_mean("accuracy")
    if accuracy is None:
        raise MissingAccuracy("Accuracy-trap check needs an 'accuracy' metric in the report")
    baseline = profile.majority_baseline_accuracy
    lift = accuracy - baseline
    mcc_value = report.metric_mean("mcc")
    recall = next((report.metric_mean(m) for m in MINORITY_RECALL_METRICS if m in report.metrics), None)

    if lift >= thresholds.lift:
        return None
    weak_mcc = mcc_value is not None and mcc_value < thresholds.mcc_gate
    weak_recall = recall is not None and recall < thresholds.minority_recall_gate
    if not (weak_mcc or weak_recall):
        return None
    return make_flag(
        FlagCode.ACCURACY_TRAP, Severity.CRITICAL,
        f"Accuracy {accuracy:.4f} is within {thresholds.lift:g} of the majority baseline {baseline:.4f}; "
        f"the model adds little beyond predicting '{profile.majority_class}'",
        accuracy=accuracy,
        majority_baseline_accuracy=baseline,
        lift=lift,
        mcc=mcc_value,
        minority_recall=recall,
    )


@dataclass(frozen=True)
class RankingComparison:
    """Orders of the same models under two metrics and their Kendall tau"""
    metric_a: str
    metric_b: str
    model_order_a: Tuple[str, ...]
    model_order_b: Tuple[str, ...]
    kendall_tau: float
    inversions: int
    flags: Tuple[DiagnosticFlag, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metric_a": self.metric_a,
            "metric_b": self.metric_b,
            "model_order_a": list(self.model_order_a),
            "model_order_b": list(self.model_order_b),
            "kendall_tau": self.kendall_tau,
            "inversions": self.inversions,
            "statistic": "kendall_tau_with_discordant_pair_count",
            "flags": [flag.to_dict() for flag in self.flags],
        }


def count_inversions(sequence: Sequence[int]) -> int:
    """Number of pairs i < j with sequence[i] > sequence[j]"""
    inversions = 0
    sorted_so_far: List[int] = []
    for i, value in enumerate(sequence):
        j = bisect(sorted_so_far, value)
        inversions += i - j
        sorted_so_far.insert(j, value)
    return inversions


def _base_name(metric: str) -> str:
    return metric.split("[", 1)[0]


def _order(
    models: Mapping[str, EvaluationReport],
    metric: str,
    direction: Direction,
    tie_break: Sequence[str] = (),
) -> Tuple[List[str], bool]:
    """Best first; ties go to the earlier id in tie_break, then the smaller id. Also reports any broken tie."""
    sign = -1.0 if direction == Direction.HIGHER_BETTER else 1.0
    preference = {m: i for i, m in enumerate(tie_break)}
    keyed = sorted(
        (sign * models[m].metric_mean(metric), preference.get(m, len(preference)), m) for m in models
    )
    tied = any(a[0] == b[0] for a, b in zip(keyed, keyed[1:]))
    return [m for _, _, m in keyed], tied


def ranking_comparison(
    models: Mapping[str, EvaluationReport],
    metric_a: str,
    metric_b: str,
    direction_a: Union[Direction, str],
    direction_b: Union[Direction, str],
    tie_break: Sequence[str] = (),
) -> RankingComparison:
    """
    Rank models by two metrics and count the pairs the metrics disagree on

    tau = 1 - 4 * inversions / (m * (m - 1)) over the tie-broken orders. Equal means are
    ordered by position in `tie_break`, then by model id. RankingTie is raised when a tie had
    to be broken; CalibrationInversion when accuracy and log loss disagree on at least one pair.
    """
    if len(models) < 2:
        raise ParameterOutOfRange(f"Ranking comparison needs at least 2 models, got {len(models)}")
    for model_id, report in models.items():
        for metric in (metric_a, metric_b):
            if metric not in report.metrics:
                raise MissingMetric(f"Model '{model_id}' has no metric '{metric}'")

    order_a, tied_a = _order(models, metric_a, Direction(direction_a), tie_break)
    order_b, tied_b = _order(models, metric_b, Direction(direction_b), tie_break)
    position_b = {model_id: i for i, model_id in enumerate(order_b)}
    inversions = count_inversions([position_b[m] for m in order_a])
    m = len(order_a)
    tau = 1.0 - 4.0 * inversions / (m * (m - 1))

    flags = []
    if tied_a or tied_b:
        flags.append(make_flag(
            FlagCode.RANKING_TIE, Severity.INFO,
            f"Equal means under {metric_a if tied_a else metric_b}; ties ordered by preference, then model id",
            tied_a=float(tied_a),
            tied_b=float(tied_b),
        ))
    if {_base_name(metric_a), _base_name(metric_b)} == {"accuracy", "log_loss"} and inversions > 0:
        flags.append(make_flag(
            FlagCode.CALIBRATION_INVERSION, Severity.WARN,
            f"Accuracy and log loss rank {inversions} model pair(s) in opposite order; "
            "confidence quality differs from decision quality",
            inversions=inversions,
            kendall_tau=tau,
            models=m,
        ))
    logger.debug(f"Ranking {metric_a} vs {metric_b}: tau={tau:.4f}, inversions={inversions}")
    return RankingComparison(metric_a, metric_b, tuple(order_a), tuple(order_b), tau, inversions, tuple(flags))


def macro_micro_gap(
    cm: ConfusionMatrix,
    beta: float = 1.0,
    thresholds: DiagnosticThresholds = DEFAULT_THRESHOLDS,
) -> Optional[DiagnosticFlag]:
    """MacroMicroGap (warn) when |micro F - macro F| exceeds the gap threshold"""
    micro = averaged_f_beta(cm, beta, AveragingMode.MICRO).value
    macro = averaged_f_beta(cm, beta, AveragingMode.MACRO).value
    gap = abs(micro - macro)
    if gap <= thresholds.macro_micro_gap:
        return None
    evidence = {"micro_f": micro, "macro_f": macro, "gap": gap, "threshold": thresholds.macro_micro_gap}
    evidence.update({f"f_{cls}": score.value for cls, score in per_class_f_beta(cm, beta).items()})
    worse = "macro" if macro < micro else "micro"
    return make_flag(
        FlagCode.MACRO_MICRO_GAP, Severity.WARN,
        f"Micro and macro F{beta:g} differ by {gap:.4f} ({worse} lower); per-class performance is uneven",
        **evidence,
    )


def mape_stability_check(
    data: RegressionData,
    thresholds: DiagnosticThresholds = DEFAULT_THRESHOLDS,
    epsilon_scale: Optional[float] = None,
) -> Optional[DiagnosticFlag]:
    """
    MapeUnstable when too many targets sit near zero relative to the median |y|

    Near zero means |y| < epsilon_scale * median(|y|), or |y| = 0 when the median is 0.
    epsilon_scale defaults to the threshold of the same name. Critical when MAPE would
    exclude every row.
    """
    scale = thresholds.epsilon_scale if epsilon_scale is None else float(epsilon_scale)
    if not math.isfinite(scale) or scale < 0:
        raise ParameterOutOfRange(f"epsilon_scale must be a non-negative number, got {epsilon_scale}")
    magnitude = np.abs(data.y_true)
    if magnitude.size == 0:
        raise TooFewSamples("MAPE stability check needs at least one row")
    median = float(np.median(magnitude))
    cutoff = scale * median
    near = magnitude < cutoff if cutoff > 0 else magnitude == 0
    fraction = float(np.count_nonzero(near)) / magnitude.size
    excluded = float(np.count_nonzero(magnitude < thresholds.mape_epsilon)) / magnitude.size
    evidence = dict(
        near_zero_fraction=fraction,
        excluded_fraction=excluded,
        median_abs_target=median,
        cutoff=cutoff,
        epsilon_scale=scale,
        threshold=thresholds.near_zero_fraction,
    )
    if excluded == 1.0:
        return make_flag(
            FlagCode.MAPE_UNSTABLE, Severity.CRITICAL,
            "Every target is effectively zero; MAPE is undefined, report MAE instead",
            **evidence,
        )
    if fraction <= thresholds.near_zero_fraction:
        return None
    return make_flag(
        FlagCode.MAPE_UNSTABLE, Severity.WARN,
        f"{fraction:.2%} of targets are near zero; MAPE will be dominated by them, prefer MAE",
        **evidence,
    )


@dataclass(frozen=True)
class CalibrationBin:
    lower: float
    upper: float
    count: int
    mean_confidence: float
    empirical_accuracy: float

    @property
    def gap(self) -> float:
        return self.mean_confidence - self.empirical_accuracy

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "count": self.count,
            "mean_confidence": self.mean_confidence,
            "empirical_accuracy": self.empirical_accuracy,
        }


@dataclass(frozen=True)
class CalibrationAudit:
    bins: Tuple[CalibrationBin, ...]
    expected_gap: float
    overconfidence: float
    warnings: Tuple[str, ...] = ()

    @property
    def max_gap(self) -> float:
        return max(abs(b.gap) for b in self.bins)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bins": [b.to_dict() for b in self.bins],
            "expected_gap": self.expected_gap,
            "overconfidence": self.overconfidence,
            "max_gap": self.max_gap,
            "warnings": list(self.warnings),
        }


def _bin_index(values: np.ndarray, bins: int) -> np.ndarray:
    return np.clip(np.floor(values * bins).astype(np.int64), 0, bins - 1)


def _merge_groups(counts: np.ndarray, min_count: int) -> List[List[int]]:
    """Greedily join consecutive non-empty bins until each group holds min_count rows"""
    groups: List[List[int]] = []
    current: List[int] = []
    held = 0
    for index in np.flatnonzero(counts > 0):
        current.append(int(index))
        held += int(counts[index])
        if held >= min_count:
            groups.append(current)
            current, held = [], 0
    if current:
        if groups:
            groups[-1].extend(current)
        else:
            groups.append(current)
    return groups


def calibration_audit(
    data: ClassificationData,
    bins: int = 10,
    min_bin_count: int = DEFAULT_THRESHOLDS.calibration_min_bin_count,
) -> CalibrationAudit:
    """
    Bin rows by their top-class probability and compare confidence with accuracy

    Bins are equal-width on [0, 1]. Empty bins are dropped and sparse ones merged with their
    neighbours until each holds min_bin_count rows (CalibrationBinsMerged).
    expected_gap = sum over bins of (count / n) * |mean_confidence - empirical_accuracy|.
    """
    if data.y_score is None:
        raise MissingScores("Calibration audit needs probability scores")
    if bins < 2:
        raise ParameterOutOfRange(f"Calibration audit needs at least 2 bins, got {bins}")
    n = len(data)
    if n == 0:
        raise TooFewSamples("Calibration audit needs at least one row")

    confidence = data.y_score.max(axis=1)
    correct = (np.argmax(data.y_score, axis=1) == data.true_index).astype(np.float64)
    index = _bin_index(confidence, bins)
    counts = np.bincount(index, minlength=bins)
    groups = _merge_groups(counts, min_bin_count)
    merged = any(len(g) > 1 for g in groups)

    table = []
    for group in groups:
        mask = np.isin(index, group)
        table.append(CalibrationBin(
            lower=group[0] / bins,
            upper=(group[-1] + 1) / bins,
            count=int(np.count_nonzero(mask)),
            mean_confidence=float(np.mean(confidence[mask])),
            empirical_accuracy=float(np.mean(correct[mask])),
        ))
    expected_gap = math.fsum(b.count / n * abs(b.gap) for b in table)
    overconfidence = math.fsum(b.count / n * b.gap for b in table)
    warnings: Tuple[str, ...] = ()
    if merged:
        warnings = (FlagCode.CALIBRATION_BINS_MERGED.value,)
        logger.debug(f"Calibration bins merged into {len(table)} group(s) of >= {min_bin_count} rows")
    return CalibrationAudit(tuple(table), expected_gap, overconfidence, warnings)


@dataclass(frozen=True)
class ReliabilityBin:
    lower: float
    upper: float
    mean_probability: float
    positive_rate: float
    count: int


def reliability_table(
    y_true: Sequence[Any],
    probability: Sequence[float],
    positive: Any,
    bins: int = 10,
) -> List[ReliabilityBin]:
    """Plot-ready reliability diagram for positive-class probabilities; empty bins are omitted"""
    truth = as_label_array(y_true) == canonical_label(positive)
    probability = np.asarray(probability, dtype=np.float64)
    if truth.shape != probability.shape:
        raise LengthMismatch(f"Labels ({truth.shape}) and probabilities ({probability.shape}) must align")
    if bins < 2:
        raise ParameterOutOfRange(f"Reliability table needs at least 2 bins, got {bins}")
    index = _bin_index(probability, bins)
    rows = []
    for b in range(bins):
        mask = index == b
        count = int(np.count_nonzero(mask))
        if count == 0:
            continue
        rows.append(ReliabilityBin(
            lower=b / bins,
            upper=(b + 1) / bins,
            mean_probability=float(np.mean(probability[mask])),
            positive_rate=float(np.mean(truth[mask])),
            count=count,
        ))
    return rows


def degeneracy_flags(report: EvaluationReport) -> List[DiagnosticFlag]:
    """Surface per-metric warnings (undefined rates, sparse classes, single fold) as info flags"""
    where: Dict[str, List[str]] = {}
    for name, metric in report.metrics.items():
        for code in metric.warnings:
            where.setdefault(code, []).append(name)
    flags = []
    for code in sorted(where):
        names = where[code]
        flags.append(make_flag(
            FlagCode(code), Severity.INFO,
            f"{code} raised while computing {', '.join(names)}",
            metrics=len(names),
        ))
    return flags


def run_diagnostics(
    report: EvaluationReport,
    data: Union[ClassificationData, RegressionData],
    thresholds: DiagnosticThresholds = DEFAULT_THRESHOLDS,
    bins: int = 10,
) -> List[DiagnosticFlag]:
    """
    Every diagnostic applicable to the task, in a fixed order

    Classification: SevereImbalance, AccuracyTrap, MacroMicroGap (K >= 3).
    Regression: MapeUnstable, ResidualTrend, ResidualHeteroscedastic.
    Metric degeneracy warnings follow as info flags.
    """
    flags: List[Optional[DiagnosticFlag]] = []
    if isinstance(data, ClassificationData):
        present = sort_labels(data.y_true.tolist())
        if len(present) >= 2:
            profile = imbalance_profile(data.y_true)
            flags.append(severe_imbalance_check(profile, thresholds))
            if "accuracy" in report.metrics:
                flags.append(accuracy_trap_check(report, profile, thresholds))
        if data.labels.K >= 3 and data.has_predictions:
            flags.append(macro_micro_gap(build_confusion(data), 1.0, thresholds))
    else:
        flags.append(mape_stability_check(data, thresholds))
        if len(data) >= bins:
            try:
                table = residual_table(data, bins)
                flags.extend(residual_flags(table, thresholds.trend_fraction, thresholds.heteroscedastic_ratio))
            except NoUsableBins:
                logger.debug("Residual flags skipped: fewer than 2 non-empty bins")
    flags.extend(degeneracy_flags(report))
    return [flag for flag in flags if flag is not None]
